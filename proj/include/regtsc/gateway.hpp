#pragma once

#include <optional>
#include <string>
#include <vector>

#include "regtsc/rerag_types.hpp"

namespace regtsc {

struct ChatMessage {
    std::string role;
    std::string content;
};

struct ChatRequest {
    std::string model = "mock";
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    int max_tokens = 2048;

    std::string request_hash() const; // stable digest over all fields
};

enum class BackendKind { Remote, Mock };

struct BackendConfig {
    BackendKind kind = BackendKind::Mock;
    std::string base_url;                        // required for Remote
    std::string api_key_env = "REG_TSC_API_KEY"; // name of the env var, never the key
    double timeout_s = 30.0;
    int max_retries = 2;
    std::string cache_dir;                       // empty = caching off
    std::string model = "mock";
    std::string embedding_model = "mock-embed";
    int mock_embedding_dim = 256;

    void validate() const;
};

// One chat round-trip. Remote: POST {base_url}/v1/chat/completions with
// bounded exponential-backoff retry; Mock: deterministic rule-based reply.
// Responses are cached on disk by request hash when cache_dir is set.
std::string chat(const ChatRequest &request, const BackendConfig &config);

// Order-preserving batch embedding. Remote: POST {base_url}/v1/embeddings;
// Mock: hashed bag-of-words, L2-normalized.
std::vector<EmbeddingVector> embed_texts(const std::vector<std::string> &texts,
                                         const BackendConfig &config);

// The mock embedding scheme, exposed so tests and the retrieval module can
// call it without a config.
EmbeddingVector mock_embed(const std::string &text, int dim = 256);

// Deterministic rule-based responder behind the mock backend. Dispatches on
// prompt markers: signal-decision prompts (regular and emergency), reviewer
// prompts, and query-generation prompts.
std::string mock_chat_response(const std::string &prompt);

// Abstract handles used by modules that only need "some backend".
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string chat(const ChatRequest &request) = 0;
};

class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    virtual std::vector<EmbeddingVector> embed(const std::vector<std::string> &texts) = 0;
};

// Backend views over a BackendConfig.
class ConfiguredChatBackend : public ChatBackend {
public:
    explicit ConfiguredChatBackend(BackendConfig config) : config_(std::move(config)) {}
    std::string chat(const ChatRequest &request) override { return regtsc::chat(request, config_); }
    const BackendConfig &config() const { return config_; }

private:
    BackendConfig config_;
};

class ConfiguredEmbeddingBackend : public EmbeddingBackend {
public:
    explicit ConfiguredEmbeddingBackend(BackendConfig config) : config_(std::move(config)) {}
    std::vector<EmbeddingVector> embed(const std::vector<std::string> &texts) override {
        return embed_texts(texts, config_);
    }

private:
    BackendConfig config_;
};

} // namespace regtsc
