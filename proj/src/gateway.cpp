#include "regtsc/gateway.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>

#include "regtsc/errors.hpp"
#include "regtsc/util.hpp"

namespace regtsc {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

void BackendConfig::validate() const {
    if (kind == BackendKind::Remote && base_url.empty())
        throw ValidationError("remote backend requires base_url");
    if (timeout_s <= 0.0) throw ValidationError("timeout must be > 0");
    if (max_retries < 0) throw ValidationError("max_retries must be >= 0");
    if (mock_embedding_dim < 1) throw ValidationError("mock_embedding_dim must be >= 1");
}

std::string ChatRequest::request_hash() const {
    ordered_json j;
    j["endpoint"] = "chat";
    j["model"] = model;
    j["messages"] = ordered_json::array();
    for (const auto &m : messages) j["messages"].push_back({{"role", m.role}, {"content", m.content}});
    j["temperature"] = temperature;
    j["max_tokens"] = max_tokens;
    return digest_hex(j.dump());
}

namespace {

std::optional<json> cache_read(const std::string &cache_dir, const std::string &hash) {
    if (cache_dir.empty()) return std::nullopt;
    fs::path p = fs::path(cache_dir) / (hash + ".json");
    std::ifstream in(p);
    if (!in) return std::nullopt;
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception &) {
        return std::nullopt; // unreadable entry, treat as a miss
    }
}

void cache_write(const std::string &cache_dir, const std::string &hash, const json &payload) {
    if (cache_dir.empty()) return;
    std::error_code ec;
    fs::create_directories(cache_dir, ec);
    fs::path final_path = fs::path(cache_dir) / (hash + ".json");
    fs::path tmp_path = final_path;
    tmp_path += ".tmp" + std::to_string(
        std::chrono::steady_clock::now().time_since_epoch().count());
    {
        std::ofstream out(tmp_path);
        if (!out) return;
        out << payload.dump();
    }
    fs::rename(tmp_path, final_path, ec);
    if (ec) fs::remove(tmp_path, ec);
}

struct HttpFailure {
    bool timeout = false;
    int status = 0;
    std::string detail;
};

// POST with bounded exponential backoff. Retries transport failures,
// timeouts and 5xx; 4xx surfaces immediately as ApiError.
json post_json(const BackendConfig &config, const std::string &path, const json &body) {
    std::string base = config.base_url;
    while (!base.empty() && base.back() == '/') base.pop_back();

    httplib::Headers headers;
    if (const char *key = std::getenv(config.api_key_env.c_str()); key && *key) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    HttpFailure last;
    const std::string payload = body.dump();
    for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
        if (attempt > 0) {
            auto wait = std::chrono::milliseconds((long)(250.0 * (1 << (attempt - 1))));
            std::this_thread::sleep_for(wait);
        }
        httplib::Client client(base);
        client.set_connection_timeout(std::chrono::milliseconds((long)(config.timeout_s * 1000)));
        client.set_read_timeout(std::chrono::milliseconds((long)(config.timeout_s * 1000)));
        client.set_write_timeout(std::chrono::milliseconds((long)(config.timeout_s * 1000)));

        auto res = client.Post(path, headers, payload, "application/json");
        if (!res) {
            auto err = res.error();
            last.timeout = (err == httplib::Error::ConnectionTimeout ||
                            err == httplib::Error::Read || err == httplib::Error::Write);
            last.status = 0;
            last.detail = httplib::to_string(err);
            continue;
        }
        if (res->status >= 200 && res->status < 300) {
            try {
                return json::parse(res->body);
            } catch (const json::exception &e) {
                throw ApiError(res->status, std::string("unparseable response body: ") + e.what());
            }
        }
        if (res->status >= 500) {
            last.timeout = false;
            last.status = res->status;
            last.detail = res->body;
            continue;
        }
        throw ApiError(res->status, res->body);
    }
    if (last.timeout) throw TimeoutError("request to " + base + path + " timed out: " + last.detail);
    throw TransportError("request to " + base + path + " failed after " +
                         std::to_string(config.max_retries + 1) + " attempts" +
                         (last.status ? " (last status " + std::to_string(last.status) + ")" : "") +
                         ": " + last.detail);
}

std::string remote_chat(const ChatRequest &request, const BackendConfig &config) {
    json body;
    body["model"] = request.model;
    body["messages"] = json::array();
    for (const auto &m : request.messages)
        body["messages"].push_back({{"role", m.role}, {"content", m.content}});
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_tokens;

    json reply = post_json(config, "/v1/chat/completions", body);
    try {
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception &e) {
        throw ApiError(200, std::string("chat response missing choices[0].message.content: ") +
                                e.what());
    }
}

std::vector<EmbeddingVector> remote_embed(const std::vector<std::string> &texts,
                                          const BackendConfig &config) {
    json body;
    body["model"] = config.embedding_model;
    body["input"] = texts;
    json reply = post_json(config, "/v1/embeddings", body);
    std::vector<EmbeddingVector> out(texts.size());
    try {
        for (const auto &item : reply.at("data")) {
            size_t index = item.at("index").get<size_t>();
            if (index >= out.size()) throw ApiError(200, "embedding index out of range");
            out[index].values = item.at("embedding").get<std::vector<double>>();
        }
    } catch (const json::exception &e) {
        throw ApiError(200, std::string("malformed embeddings response: ") + e.what());
    }
    for (size_t i = 0; i < out.size(); ++i) {
        if (out[i].values.empty())
            throw ApiError(200, "embeddings response missing entry " + std::to_string(i));
    }
    return out;
}

std::string concat_messages(const ChatRequest &request) {
    std::string joined;
    for (const auto &m : request.messages) {
        if (!joined.empty()) joined += "\n";
        joined += m.content;
    }
    return joined;
}

} // namespace

std::string chat(const ChatRequest &request, const BackendConfig &config) {
    config.validate();
    if (request.messages.empty()) throw ValidationError("chat request has no messages");
    if (request.temperature < 0.0) throw ValidationError("temperature must be >= 0");

    const std::string hash = request.request_hash();
    if (auto cached = cache_read(config.cache_dir, hash)) {
        if (cached->contains("response")) return cached->at("response").get<std::string>();
    }
    std::string response = config.kind == BackendKind::Mock
                               ? mock_chat_response(concat_messages(request))
                               : remote_chat(request, config);
    cache_write(config.cache_dir, hash, json{{"request_hash", hash}, {"response", response}});
    return response;
}

std::vector<EmbeddingVector> embed_texts(const std::vector<std::string> &texts,
                                         const BackendConfig &config) {
    config.validate();
    if (texts.empty()) throw EmptyTextError("no texts to embed");
    for (const auto &t : texts) {
        if (t.empty()) throw EmptyTextError("cannot embed an empty text");
    }

    ordered_json key;
    key["endpoint"] = "embeddings";
    key["model"] = config.embedding_model;
    key["dim"] = config.mock_embedding_dim;
    key["input"] = texts;
    const std::string hash = digest_hex(key.dump());
    if (auto cached = cache_read(config.cache_dir, hash)) {
        if (cached->contains("vectors")) {
            std::vector<EmbeddingVector> out;
            for (const auto &v : cached->at("vectors"))
                out.push_back({v.get<std::vector<double>>()});
            if (out.size() == texts.size()) return out;
        }
    }

    std::vector<EmbeddingVector> out;
    if (config.kind == BackendKind::Mock) {
        for (const auto &t : texts) {
            if (tokenize(t).empty())
                throw EmptyTextError("cannot embed a text without tokens: \"" + t + "\"");
        }
        out.resize(texts.size());
#pragma omp parallel for schedule(static)
        for (long i = 0; i < (long)texts.size(); ++i) {
            out[i] = mock_embed(texts[i], config.mock_embedding_dim);
        }
    } else {
        out = remote_embed(texts, config);
    }

    json vectors = json::array();
    for (const auto &v : out) vectors.push_back(v.values);
    cache_write(config.cache_dir, hash, json{{"request_hash", hash}, {"vectors", vectors}});
    return out;
}

} // namespace regtsc
