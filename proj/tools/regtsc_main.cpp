#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "regtsc/errors.hpp"
#include "regtsc/runner.hpp"
#include "regtsc/util.hpp"

namespace fs = std::filesystem;
using namespace regtsc;

namespace {

struct BackendFlags {
    std::string kind = "mock";
    std::string base_url;
    std::string model = "mock";
    std::string embedding_model = "mock-embed";
    std::string cache_dir;
    std::string api_key_env = "REG_TSC_API_KEY";
    double timeout_s = 30.0;
    int max_retries = 2;

    BackendConfig build() const {
        BackendConfig cfg;
        cfg.kind = to_lower(kind) == "remote" ? BackendKind::Remote : BackendKind::Mock;
        cfg.base_url = base_url;
        cfg.model = model;
        cfg.embedding_model = embedding_model;
        cfg.cache_dir = cache_dir;
        cfg.api_key_env = api_key_env;
        cfg.timeout_s = timeout_s;
        cfg.max_retries = max_retries;
        return cfg;
    }
};

void add_backend_flags(CLI::App *cmd, BackendFlags &flags) {
    cmd->add_option("--backend", flags.kind, "Backend kind: mock or remote")
        ->check(CLI::IsMember({"mock", "remote"}, CLI::ignore_case));
    cmd->add_option("--base-url", flags.base_url, "Remote backend base URL (excludes /v1)");
    cmd->add_option("--model", flags.model, "Chat model id");
    cmd->add_option("--embedding-model", flags.embedding_model, "Embedding model id");
    cmd->add_option("--cache-dir", flags.cache_dir, "Response cache directory");
    cmd->add_option("--api-key-env", flags.api_key_env, "Env var holding the API key");
    cmd->add_option("--timeout", flags.timeout_s, "Request timeout in seconds");
    cmd->add_option("--max-retries", flags.max_retries, "Retry budget for transport failures");
}

struct RunFlags {
    std::string scenario;
    std::string policy; // empty = scenario default, then MockHeuristic
    std::optional<uint64_t> seed;
    std::optional<int> decision_interval;
    bool fidelity = false;
    std::string out_dir;
    int retrieval_k = 1;
    std::string guidance;
    std::string guidance_vectors;
    std::string log_cases;
    bool step_log = false;
};

void add_run_flags(CLI::App *cmd, RunFlags &flags, bool with_policy = true) {
    cmd->add_option("--scenario", flags.scenario, "Scenario file (.scenario.json)")
        ->required();
    if (with_policy)
        cmd->add_option("--policy", flags.policy,
                        "Policy: MockHeuristic, Remote, FixedTime or Random");
    cmd->add_option("--seed", [&flags](const std::vector<std::string> &vals) {
            try {
                flags.seed = std::stoull(vals.at(0));
            } catch (const std::exception &) {
                return false;
            }
            return true;
        }, "Override the scenario seed")->type_name("UINT");
    cmd->add_option("--decision-interval",
                    [&flags](const std::vector<std::string> &vals) {
                        try {
                            flags.decision_interval = std::stoi(vals.at(0));
                        } catch (const std::exception &) {
                            return false;
                        }
                        return true;
                    },
                    "Override the decision interval (steps)")
        ->type_name("INT");
    cmd->add_flag("--fidelity", flags.fidelity, "Decide every step (decision interval 1)");
    cmd->add_option("--out", flags.out_dir, "Output directory for artifacts");
    cmd->add_option("--k", flags.retrieval_k, "Guidance items retrieved per deep decision");
    cmd->add_option("--guidance", flags.guidance, "guidance.jsonl to load");
    cmd->add_option("--guidance-vectors", flags.guidance_vectors,
                    "Vector file for --guidance (default: sibling .vectors.json)");
    cmd->add_option("--log-cases", flags.log_cases, "Write emergency cases to this JSONL file");
    cmd->add_flag("--step-log", flags.step_log, "Write steps.jsonl (one line per decision point)");
}

RunManifest make_manifest(const RunFlags &flags, const BackendFlags &backend) {
    RunManifest m;
    m.scenario_path = flags.scenario;
    if (!flags.policy.empty()) {
        m.policy = policy_from_name(flags.policy);
    } else {
        m.policy = load_scenario(flags.scenario).default_policy.value_or(Policy::MockHeuristic);
    }
    m.backend = backend.build();
    m.out_dir = flags.out_dir;
    m.seed = flags.seed;
    m.decision_interval = flags.fidelity ? std::optional<int>(1) : flags.decision_interval;
    m.retrieval_k = flags.retrieval_k;
    m.guidance_items_path = flags.guidance;
    m.guidance_vectors_path = flags.guidance_vectors;
    if (!flags.guidance.empty() && flags.guidance_vectors.empty()) {
        fs::path p(flags.guidance);
        p.replace_extension(".vectors.json");
        m.guidance_vectors_path = p.string();
    }
    m.case_log_path = flags.log_cases;
    m.write_step_log = flags.step_log;
    return m;
}

int cmd_run(const RunFlags &flags, const BackendFlags &backend) {
    RunResult result = run(make_manifest(flags, backend));
    std::cout << metrics_to_json(result.metrics);
    return 0;
}

int cmd_collect(const RunFlags &flags, const BackendFlags &backend, int t_re, double eta,
                bool no_filter, std::string dataset) {
    RunManifest manifest = make_manifest(flags, backend);
    if (dataset.empty()) {
        fs::path dir = manifest.out_dir.empty() ? fs::path(".") : fs::path(manifest.out_dir);
        fs::create_directories(dir);
        dataset = (dir / "imitation.jsonl").string();
    }
    FilterParams filter{t_re, eta};
    CollectStats stats = collect_imitation(manifest, filter, dataset, no_filter);
    nlohmann::ordered_json j{{"dataset", dataset},
                             {"captured", stats.captured},
                             {"kept", stats.kept},
                             {"dropped_by_filter", stats.dropped_by_filter},
                             {"dropped_no_window", stats.dropped_no_window}};
    std::cout << j.dump(2) << "\n";
    if (stats.kept == 0)
        std::cerr << "warning: reward filter rejected every trajectory (" << stats.captured
                  << " captured)\n";
    return 0;
}

int cmd_build_guidance(const std::string &cases, const BackendFlags &backend,
                       const std::string &out_dir, std::string items, std::string vectors) {
    fs::path dir = out_dir.empty() ? fs::path(".") : fs::path(out_dir);
    fs::create_directories(dir);
    if (items.empty()) items = (dir / "guidance.jsonl").string();
    if (vectors.empty()) vectors = (dir / "guidance.vectors.json").string();
    GuidanceRepository repo = build_guidance(cases, backend.build(), items, vectors);
    nlohmann::ordered_json j{{"items", items}, {"vectors", vectors}, {"size", repo.size()}};
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_compare(const RunFlags &flags, const BackendFlags &backend,
                const std::vector<std::string> &policies, const std::string &baseline) {
    std::vector<RunManifest> manifests;
    for (const auto &p : policies) {
        RunFlags per = flags;
        per.policy = p;
        per.out_dir = flags.out_dir.empty()
                          ? ""
                          : (fs::path(flags.out_dir) / to_lower(p)).string();
        manifests.push_back(make_manifest(per, backend));
    }
    std::string csv = flags.out_dir.empty()
                          ? "comparison.csv"
                          : (fs::path(flags.out_dir) / "comparison.csv").string();
    if (!flags.out_dir.empty()) fs::create_directories(flags.out_dir);
    ComparisonReport report = compare(manifests, baseline, csv);
    std::cout << comparison_to_csv(report);
    std::cerr << "wrote " << csv << "\n";
    return 0;
}

int cmd_export(const RunFlags &flags, const BackendFlags &backend, const std::string &buffers_dir,
               int epochs, int batch_size, double epsilon, bool clamp) {
    fs::path out_dir = flags.out_dir.empty() ? fs::path(".") : fs::path(flags.out_dir);
    fs::create_directories(out_dir);
    uint64_t sample_seed = flags.seed.value_or(1);

    auto export_batch = [&](const std::vector<ExperienceBuffer> &buffers, uint64_t seed,
                            const std::string &path) {
        std::vector<double> means;
        means.reserve(buffers.size());
        for (const auto &b : buffers) means.push_back(b.mean_reward());
        std::vector<double> probs = sampling_probabilities(means, epsilon);
        auto rng = make_rng(seed, 0x5A5A);
        auto batch = sample_refinement_batch(buffers, probs, batch_size, rng);
        std::vector<FineTuneRecord> records;
        records.reserve(batch.size());
        for (const auto &t : batch) records.push_back({t.prompt, t.response, t.reward});
        export_dataset(records, path, DatasetKind::Refinement, clamp);

        nlohmann::ordered_json j;
        j["dataset"] = path;
        j["batch_size"] = (int)batch.size();
        j["types"] = nlohmann::ordered_json::array();
        for (size_t i = 0; i < buffers.size(); ++i) {
            j["types"].push_back({{"type_signature", buffers[i].type_signature()},
                                  {"buffer_size", buffers[i].size()},
                                  {"mean_reward", means[i]},
                                  {"sampling_probability", probs[i]}});
        }
        std::cout << j.dump(2) << "\n";
    };

    if (!buffers_dir.empty()) {
        std::vector<ExperienceBuffer> buffers;
        std::vector<fs::path> files;
        for (const auto &entry : fs::directory_iterator(buffers_dir)) {
            if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto &f : files) buffers.push_back(load_buffer(f.string()));
        if (buffers.empty()) throw ValidationError("no buffer snapshots under " + buffers_dir);
        export_batch(buffers, sample_seed, (out_dir / "refinement.jsonl").string());
        return 0;
    }

    // Epoch mode: fresh environment per epoch, buffers accumulate across
    // epochs, one prioritized dataset per epoch.
    std::map<std::string, ExperienceBuffer> accumulated;
    for (int e = 1; e <= epochs; ++e) {
        RunFlags per = flags;
        per.seed = stream_seed(sample_seed, 0xE90C, (uint64_t)e);
        per.out_dir = "";
        RunManifest manifest = make_manifest(per, backend);
        RunResult result = run(manifest);
        for (const auto &t : result.trajectories) {
            auto it = accumulated.find(t.type_signature);
            if (it == accumulated.end())
                it = accumulated.emplace(t.type_signature, ExperienceBuffer(t.type_signature))
                         .first;
            it->second.append(t);
        }
        std::vector<ExperienceBuffer> buffers;
        for (auto &[sig, buf] : accumulated) buffers.push_back(buf);
        char name[64];
        std::snprintf(name, sizeof(name), "refinement_epoch_%03d.jsonl", e);
        export_batch(buffers, sample_seed + (uint64_t)e, (out_dir / name).string());
    }
    fs::path buf_dir = out_dir / "buffers";
    fs::create_directories(buf_dir);
    for (const auto &[sig, buf] : accumulated) {
        std::string fname;
        for (char c : sig)
            fname.push_back(std::isalnum((unsigned char)c) ? c : '_');
        save_buffer(buf, (buf_dir / (fname + ".jsonl")).string());
    }
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"regtsc: emergency-aware traffic signal control laboratory"};
    app.require_subcommand(1);

    RunFlags run_flags;
    BackendFlags backend_flags;

    auto *run_cmd = app.add_subcommand("run", "Run one scenario and report metrics");
    add_run_flags(run_cmd, run_flags);
    add_backend_flags(run_cmd, backend_flags);

    RunFlags collect_flags;
    BackendFlags collect_backend;
    int t_re = 1;
    double eta = 0.5;
    bool no_filter = false;
    std::string dataset;
    auto *collect_cmd =
        app.add_subcommand("collect", "Collect a reward-filtered imitation dataset");
    add_run_flags(collect_cmd, collect_flags);
    add_backend_flags(collect_cmd, collect_backend);
    collect_cmd->add_option("--t-re", t_re, "Forward reward window length (decision points)")
        ->required();
    collect_cmd->add_option("--eta", eta, "Keep threshold on the window sum");
    collect_cmd->add_flag("--no-filter", no_filter, "Keep every trajectory (filter disabled)");
    collect_cmd->add_option("--dataset", dataset, "Output JSONL (default <out>/imitation.jsonl)");

    std::string cases_path, bg_out, bg_items, bg_vectors;
    BackendFlags bg_backend;
    auto *bg_cmd = app.add_subcommand("build-guidance",
                                      "Distill a case log into a guidance repository");
    bg_cmd->add_option("--cases", cases_path, "Historical case log (JSONL)")->required();
    bg_cmd->add_option("--out", bg_out, "Output directory");
    bg_cmd->add_option("--items", bg_items, "Items file (default <out>/guidance.jsonl)");
    bg_cmd->add_option("--vectors", bg_vectors,
                       "Vectors file (default <out>/guidance.vectors.json)");
    add_backend_flags(bg_cmd, bg_backend);

    RunFlags compare_flags;
    BackendFlags compare_backend;
    std::vector<std::string> policies{"FixedTime", "Random", "MockHeuristic"};
    std::string baseline = "FixedTime";
    auto *compare_cmd = app.add_subcommand("compare", "Run several policies on one scenario");
    add_run_flags(compare_cmd, compare_flags, /*with_policy=*/false);
    add_backend_flags(compare_cmd, compare_backend);
    compare_cmd->add_option("--policies", policies, "Policies to run")->delimiter(',');
    compare_cmd->add_option("--baseline", baseline, "Baseline policy for deltas");

    RunFlags export_flags;
    BackendFlags export_backend;
    std::string buffers_dir;
    int epochs = 1, batch_size = 64;
    double epsilon = 0.1;
    bool clamp = false;
    auto *export_cmd =
        app.add_subcommand("export", "Export prioritized refinement datasets (one per epoch)");
    export_cmd->add_option("--buffers", buffers_dir,
                           "Sample from existing buffer snapshots instead of running");
    export_cmd->add_option("--scenario", export_flags.scenario, "Scenario file for epoch mode");
    export_cmd->add_option("--policy", export_flags.policy,
                           "Policy for epoch runs (default: scenario's, then MockHeuristic)");
    export_cmd->add_option("--seed",
                           [&export_flags](const std::vector<std::string> &vals) {
                               try {
                                   export_flags.seed = std::stoull(vals.at(0));
                               } catch (const std::exception &) {
                                   return false;
                               }
                               return true;
                           },
                           "Sampling seed / base seed for epochs")
        ->type_name("UINT");
    export_cmd->add_option("--decision-interval",
                           [&export_flags](const std::vector<std::string> &vals) {
                               try {
                                   export_flags.decision_interval = std::stoi(vals.at(0));
                               } catch (const std::exception &) {
                                   return false;
                               }
                               return true;
                           },
                           "Decision interval for epoch runs")
        ->type_name("INT");
    export_cmd->add_flag("--fidelity", export_flags.fidelity, "Decide every step");
    export_cmd->add_option("--epochs", epochs, "max_epoch for the refinement loop");
    export_cmd->add_option("--batch-size", batch_size, "Trajectories per refinement dataset");
    export_cmd->add_option("--epsilon", epsilon, "Sampling smoothing epsilon");
    export_cmd->add_option("--out", export_flags.out_dir, "Output directory");
    export_cmd->add_flag("--clamp-negative-weights", clamp,
                         "Clamp refinement weights at zero (default keeps raw rewards)");
    add_backend_flags(export_cmd, export_backend);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2; // flag/config problems are validation failures
    }

    try {
        if (run_cmd->parsed()) return cmd_run(run_flags, backend_flags);
        if (collect_cmd->parsed())
            return cmd_collect(collect_flags, collect_backend, t_re, eta, no_filter, dataset);
        if (bg_cmd->parsed())
            return cmd_build_guidance(cases_path, bg_backend, bg_out, bg_items, bg_vectors);
        if (compare_cmd->parsed())
            return cmd_compare(compare_flags, compare_backend, policies, baseline);
        if (export_cmd->parsed()) {
            if (buffers_dir.empty() && export_flags.scenario.empty())
                throw ValidationError("export needs --buffers or --scenario");
            return cmd_export(export_flags, export_backend, buffers_dir, epochs, batch_size,
                              epsilon, clamp);
        }
    } catch (const BackendError &e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return 3;
    } catch (const RegtscError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
