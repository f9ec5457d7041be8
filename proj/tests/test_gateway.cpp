#include <doctest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <set>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "fixtures.hpp"
#include "regtsc/agent.hpp"
#include "regtsc/gateway.hpp"
#include "regtsc/observation.hpp"

using namespace regtsc;
namespace fs = std::filesystem;

namespace {

struct LocalServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;

    void start() {
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }

    std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port); }

    ~LocalServer() {
        server.stop();
        if (thread.joinable()) thread.join();
    }
};

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("regtsc_test_" + std::to_string(
                                     std::chrono::steady_clock::now().time_since_epoch().count()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

ChatRequest simple_request(const std::string &content) {
    ChatRequest req;
    req.messages = {{"user", content}};
    return req;
}

} // namespace

TEST_SUITE("gateway") {

TEST_CASE("request hashes are stable and content-sensitive") {
    ChatRequest a = simple_request("hello");
    ChatRequest b = simple_request("hello");
    ChatRequest c = simple_request("hello!");
    CHECK(a.request_hash() == b.request_hash());
    CHECK(a.request_hash() != c.request_hash());
    CHECK(a.request_hash().size() == 32);

    b.temperature = 0.5;
    CHECK(a.request_hash() != b.request_hash());
}

TEST_CASE("hashes stay distinct over a generated corpus") {
    std::set<std::string> seen;
    for (int i = 0; i < 2000; ++i) {
        seen.insert(simple_request("prompt variant " + std::to_string(i)).request_hash());
    }
    CHECK(seen.size() == 2000);
}

TEST_CASE("mock embedding is unit-norm, deterministic and content-sensitive") {
    EmbeddingVector a = mock_embed("queue", 256);
    EmbeddingVector b = mock_embed("queue", 256);
    EmbeddingVector c = mock_embed("emergency", 256);
    CHECK(a.values == b.values);
    CHECK(a.values != c.values);
    double norm = 0.0;
    for (double x : a.values) norm += x * x;
    CHECK(std::abs(std::sqrt(norm) - 1.0) < 1e-9);
    CHECK_THROWS_AS(mock_embed("", 256), EmptyTextError);
    CHECK_THROWS_AS(mock_embed("!!!", 256), EmptyTextError);
}

TEST_CASE("mock embed batch preserves arity and order") {
    BackendConfig cfg; // mock
    std::vector<std::string> texts = {"first text", "second text", "third text"};
    auto vecs = embed_texts(texts, cfg);
    REQUIRE(vecs.size() == 3);
    for (size_t i = 0; i < texts.size(); ++i) {
        CHECK(vecs[i].values == mock_embed(texts[i], cfg.mock_embedding_dim).values);
    }

    std::vector<std::string> permuted = {texts[2], texts[0], texts[1]};
    auto pvecs = embed_texts(permuted, cfg);
    CHECK(pvecs[0].values == vecs[2].values);
    CHECK(pvecs[1].values == vecs[0].values);
    CHECK(pvecs[2].values == vecs[1].values);

    CHECK_THROWS_AS(embed_texts({}, cfg), EmptyTextError);
    CHECK_THROWS_AS(embed_texts({""}, cfg), EmptyTextError);
}

TEST_CASE("mock chat is a pure function of the prompt") {
    std::string prompt = render_regular_prompt(fixtures::cross_observation()).text;
    CHECK(mock_chat_response(prompt) == mock_chat_response(prompt));
}

TEST_CASE("mock regular decision is a well-formed response picking the busiest phase") {
    auto obs = fixtures::cross_observation();
    std::string reply = mock_chat_response(render_regular_prompt(obs).text);
    ParsedResponse parsed = parse_response(reply, obs.phase_count);
    // pressures QV+near: phase1 7, phase2 4, phase3 10, phase4 8
    CHECK(parsed.phase == 3);
    CHECK(parsed.explanation.has_value());
    CHECK_FALSE(parsed.analysis.has_value());
}

TEST_CASE("mock deep decision serves the ambulance's lane") {
    auto obs = fixtures::cross_observation();
    auto ev = fixtures::cross_ambulance();
    std::string reply =
        mock_chat_response(render_emergency_prompt(obs, ev, fixtures::cross_guidance()).text);
    ParsedResponse parsed = parse_response(reply, obs.phase_count);
    CHECK(parsed.phase == 4);
    REQUIRE(parsed.analysis.has_value());
    CHECK(parsed.analysis->find("road#2_1") != std::string::npos);
    CHECK(parsed.explanation->find("15.9") != std::string::npos); // 276.8 m / 17.4 m/s
}

TEST_CASE("chat responses are cached by request hash") {
    TempDir tmp;
    LocalServer srv;
    std::atomic<int> hits{0};
    srv.server.Post("/v1/chat/completions",
                    [&](const httplib::Request &, httplib::Response &res) {
                        ++hits;
                        res.set_content(
                            R"({"choices":[{"message":{"content":"<response><signal>2</signal></response>"}}]})",
                            "application/json");
                    });
    srv.start();

    BackendConfig cfg;
    cfg.kind = BackendKind::Remote;
    cfg.base_url = srv.base_url();
    cfg.cache_dir = tmp.path.string();

    ChatRequest req = simple_request("cache me");
    std::string first = chat(req, cfg);
    std::string second = chat(req, cfg);
    CHECK(first == second);
    CHECK(hits.load() == 1); // second call was a cache hit

    BackendConfig no_cache = cfg;
    no_cache.cache_dir.clear();
    CHECK(chat(req, no_cache) == first); // cache transparency
    CHECK(hits.load() == 2);
}

TEST_CASE("persistent 500s exhaust retries into TransportError") {
    LocalServer srv;
    std::atomic<int> hits{0};
    srv.server.Post("/v1/chat/completions",
                    [&](const httplib::Request &, httplib::Response &res) {
                        ++hits;
                        res.status = 500;
                        res.set_content("boom", "text/plain");
                    });
    srv.start();

    BackendConfig cfg;
    cfg.kind = BackendKind::Remote;
    cfg.base_url = srv.base_url();
    cfg.max_retries = 2;
    CHECK_THROWS_AS(chat(simple_request("x"), cfg), TransportError);
    CHECK(hits.load() == 3); // initial try + 2 retries
}

TEST_CASE("4xx surfaces immediately as ApiError") {
    LocalServer srv;
    std::atomic<int> hits{0};
    srv.server.Post("/v1/chat/completions",
                    [&](const httplib::Request &, httplib::Response &res) {
                        ++hits;
                        res.status = 404;
                        res.set_content("nope", "text/plain");
                    });
    srv.start();

    BackendConfig cfg;
    cfg.kind = BackendKind::Remote;
    cfg.base_url = srv.base_url();
    cfg.max_retries = 3;
    CHECK_THROWS_AS(chat(simple_request("x"), cfg), ApiError);
    CHECK(hits.load() == 1);
}

TEST_CASE("remote embeddings restore input order from indices") {
    LocalServer srv;
    srv.server.Post("/v1/embeddings", [&](const httplib::Request &, httplib::Response &res) {
        res.set_content(
            R"({"data":[{"index":1,"embedding":[0.0,1.0]},{"index":0,"embedding":[1.0,0.0]}]})",
            "application/json");
    });
    srv.start();

    BackendConfig cfg;
    cfg.kind = BackendKind::Remote;
    cfg.base_url = srv.base_url();
    auto vecs = embed_texts({"a", "b"}, cfg);
    REQUIRE(vecs.size() == 2);
    CHECK(vecs[0].values == std::vector<double>{1.0, 0.0});
    CHECK(vecs[1].values == std::vector<double>{0.0, 1.0});
}

TEST_CASE("concurrent cached chat calls agree and leave one cache entry") {
    TempDir tmp;
    BackendConfig cfg; // mock
    cfg.cache_dir = tmp.path.string();
    ChatRequest req = simple_request(render_regular_prompt(fixtures::cross_observation()).text);
    std::string expected = chat(req, BackendConfig{});

    std::vector<std::thread> workers;
    std::vector<std::string> results(8);
    for (int t = 0; t < 8; ++t) {
        workers.emplace_back([&, t] { results[t] = chat(req, cfg); });
    }
    for (auto &w : workers) w.join();
    for (const auto &r : results) CHECK(r == expected);

    int entries = 0;
    for (const auto &e : fs::directory_iterator(tmp.path)) {
        if (e.path().extension() == ".json") ++entries;
    }
    CHECK(entries == 1);
}

TEST_CASE("remote backend without base_url is rejected") {
    BackendConfig cfg;
    cfg.kind = BackendKind::Remote;
    CHECK_THROWS_AS(chat(simple_request("x"), cfg), ValidationError);
}

} // TEST_SUITE
