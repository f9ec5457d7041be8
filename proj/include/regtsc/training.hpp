#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "regtsc/errors.hpp"

namespace regtsc {

struct RewardParams {
    double lambda1 = 5.0;
    double lambda2 = 1.0;
    double tau = 5.0;   // seconds
    double gamma = 1.0; // > 0, guards the WTE denominator

    void validate() const;
};

struct FilterParams {
    int t_re = 1;      // lookahead decision points, no paper default
    double eta = 0.5;  // keep threshold

    void validate() const;
};

// r = l1 * (QL_t - QL_next) / max(QL_next, 1) + l2 * (tau - WTE) / (WTE + gamma).
// WTE is 0 when no emergency vehicle was attributed to the intersection,
// which makes the second term the constant bonus l2 * tau / gamma.
double compute_reward(double ql_t, double ql_next, double wte, const RewardParams &params);

// Keep iff the window sum meets the threshold (>=, the formula governs).
bool filter_trajectory(const std::vector<double> &reward_window, const FilterParams &params);

struct ReasoningTrajectory {
    std::string prompt;   // X
    std::string response; // Y, full tagged text
    double reward = 0.0;  // r
    std::string type_signature;
    int step = 0;
    std::string intersection_id;
};

class ExperienceBuffer {
public:
    explicit ExperienceBuffer(std::string type_signature)
        : type_signature_(std::move(type_signature)) {}

    void append(ReasoningTrajectory trajectory);

    const std::string &type_signature() const { return type_signature_; }
    const std::vector<ReasoningTrajectory> &trajectories() const { return trajectories_; }
    double mean_reward() const { return mean_reward_; }
    size_t size() const { return trajectories_.size(); }
    bool empty() const { return trajectories_.empty(); }

private:
    std::string type_signature_;
    std::vector<ReasoningTrajectory> trajectories_;
    double mean_reward_ = 0.0; // recomputed exactly on every insertion
};

void save_buffer(const ExperienceBuffer &buffer, const std::string &path);
ExperienceBuffer load_buffer(const std::string &path);

// SPr_n = (1 / (r_n + |min r| + eps)) / sum_k (1 / (r_k + |min r| + eps)).
std::vector<double> sampling_probabilities(const std::vector<double> &mean_rewards,
                                           double epsilon);

// Buffer index i.i.d. from probs, then uniform within the buffer.
std::vector<ReasoningTrajectory>
sample_refinement_batch(const std::vector<ExperienceBuffer> &buffers,
                        const std::vector<double> &probs, int batch_size, std::mt19937_64 &rng);

struct FineTuneRecord {
    std::string prompt;
    std::string response;
    double weight = 1.0;
};

enum class DatasetKind { Imitation, Refinement };

// JSONL with fields prompt/response/weight. Imitation forces weight 1.0;
// refinement keeps raw rewards unless clamp_negative_weights is set.
void export_dataset(const std::vector<FineTuneRecord> &records, const std::string &path,
                    DatasetKind kind, bool clamp_negative_weights = false);
std::vector<FineTuneRecord> load_dataset(const std::string &path);

// --- toy loss verifier ----------------------------------------------------
//
// Tabular softmax next-token model: context 0 is start-of-sequence, context
// v+1 follows token v. P(y | ctx) = softmax(logits[ctx])[y].

struct ToyModel {
    int vocab_size = 0;
    std::vector<double> logits; // (vocab_size + 1) x vocab_size, row-major

    double &logit(int context, int token) { return logits[context * vocab_size + token]; }
    double logit(int context, int token) const { return logits[context * vocab_size + token]; }
    int context_count() const { return vocab_size + 1; }
};

ToyModel make_uniform_toy_model(int vocab_size);

struct WeightedSequence {
    std::vector<int> tokens;
    double weight = 1.0;
};

struct ToyLossResult {
    double loss = 0.0;
    std::vector<double> gradient; // same layout as ToyModel::logits
};

// Unweighted NLL over a batch of sequences (the plain imitation loss).
double toy_nll(const ToyModel &model, const std::vector<std::vector<int>> &sequences);

// loss = -sum_b w_b * sum_w log P(y_w | y_<w), analytic gradient included.
ToyLossResult toy_weighted_nll(const ToyModel &model, const std::vector<WeightedSequence> &batch);

} // namespace regtsc
