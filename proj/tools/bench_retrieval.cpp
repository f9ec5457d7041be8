// Compares the serial reference scan against the OpenMP kernel on synthetic
// repositories and checks that both return identical rankings.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "regtsc/rerag.hpp"

using namespace regtsc;
namespace chrono = std::chrono;

namespace {

GuidanceRepository random_repo(int d, int dim, std::mt19937_64 &rng) {
    GuidanceRepository repo;
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int i = 0; i < d; ++i) {
        char id[16];
        std::snprintf(id, sizeof(id), "g%06d", i);
        repo.items.push_back({id, "s", "a", "e"});
        EmbeddingVector v;
        v.values.resize(dim);
        for (double &x : v.values) x = gauss(rng);
        repo.vectors.push_back(std::move(v));
    }
    return repo;
}

double time_ms(const std::function<void()> &fn, int reps) {
    auto t0 = chrono::high_resolution_clock::now();
    for (int r = 0; r < reps; ++r) fn();
    auto t1 = chrono::high_resolution_clock::now();
    return chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

} // namespace

int main() {
#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (no OpenMP)\n");
#endif
    std::printf("%10s %6s %4s %12s %12s %9s\n", "D", "dim", "K", "serial(ms)", "openmp(ms)",
                "speedup");

    std::mt19937_64 rng(42);
    const int dim = 256;
    const int k = 10;
    for (int d : {1024, 8192, 65536}) {
        GuidanceRepository repo = random_repo(d, dim, rng);
        EmbeddingVector query;
        query.values.resize(dim);
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (double &x : query.values) x = gauss(rng);

        auto serial = retrieve_serial(query, repo, k);
        auto parallel = retrieve(query, repo, k);
        bool same = serial.size() == parallel.size();
        for (size_t i = 0; same && i < serial.size(); ++i) {
            same = serial[i].item.id == parallel[i].item.id &&
                   serial[i].score == parallel[i].score;
        }
        if (!same) {
            std::printf("MISMATCH at D=%d\n", d);
            return 1;
        }

        int reps = d <= 8192 ? 50 : 10;
        double t_serial = time_ms([&] { retrieve_serial(query, repo, k); }, reps);
        double t_parallel = time_ms([&] { retrieve(query, repo, k); }, reps);
        std::printf("%10d %6d %4d %12.3f %12.3f %8.2fx\n", d, dim, k, t_serial, t_parallel,
                    t_serial / t_parallel);
    }
    return 0;
}
