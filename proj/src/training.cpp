#include "regtsc/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "regtsc/util.hpp"

namespace regtsc {

using nlohmann::ordered_json;

void RewardParams::validate() const {
    if (gamma <= 0.0) throw ValidationError("gamma must be > 0");
    if (tau < 0.0) throw ValidationError("tau must be >= 0");
}

void FilterParams::validate() const {
    if (t_re < 1) throw ValidationError("t_re must be >= 1");
}

double compute_reward(double ql_t, double ql_next, double wte, const RewardParams &params) {
    params.validate();
    if (ql_t < 0.0 || ql_next < 0.0 || wte < 0.0)
        throw NegativeInputError("reward inputs must be non-negative");
    double queue_term = params.lambda1 * (ql_t - ql_next) / std::max(ql_next, 1.0);
    double emergency_term = params.lambda2 * (params.tau - wte) / (wte + params.gamma);
    return queue_term + emergency_term;
}

bool filter_trajectory(const std::vector<double> &reward_window, const FilterParams &params) {
    params.validate();
    if ((int)reward_window.size() != params.t_re)
        throw WindowLengthError("reward window has " + std::to_string(reward_window.size()) +
                                " entries, expected " + std::to_string(params.t_re));
    double sum = std::accumulate(reward_window.begin(), reward_window.end(), 0.0);
    return sum >= params.eta;
}

void ExperienceBuffer::append(ReasoningTrajectory trajectory) {
    trajectories_.push_back(std::move(trajectory));
    double sum = 0.0;
    for (const auto &t : trajectories_) sum += t.reward;
    mean_reward_ = sum / (double)trajectories_.size();
}

void save_buffer(const ExperienceBuffer &buffer, const std::string &path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write buffer file: " + path);
    ordered_json header{{"type_signature", buffer.type_signature()},
                        {"count", buffer.size()},
                        {"mean_reward", buffer.mean_reward()}};
    out << header.dump() << "\n";
    for (const auto &t : buffer.trajectories()) {
        ordered_json j{{"prompt", t.prompt},
                       {"response", t.response},
                       {"reward", t.reward},
                       {"type_signature", t.type_signature},
                       {"step", t.step},
                       {"intersection_id", t.intersection_id}};
        out << j.dump() << "\n";
    }
}

ExperienceBuffer load_buffer(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open buffer file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("buffer file is empty: " + path);
    std::string type_signature;
    try {
        type_signature = ordered_json::parse(line).at("type_signature").get<std::string>();
    } catch (const nlohmann::json::exception &e) {
        throw ParseError(path + " header: " + e.what());
    }
    ExperienceBuffer buffer(type_signature);
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            auto j = ordered_json::parse(line);
            ReasoningTrajectory t;
            t.prompt = j.at("prompt").get<std::string>();
            t.response = j.at("response").get<std::string>();
            t.reward = j.at("reward").get<double>();
            t.type_signature = j.at("type_signature").get<std::string>();
            t.step = j.at("step").get<int>();
            t.intersection_id = j.at("intersection_id").get<std::string>();
            buffer.append(std::move(t));
        } catch (const nlohmann::json::exception &e) {
            throw ParseError(path + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return buffer;
}

std::vector<double> sampling_probabilities(const std::vector<double> &mean_rewards,
                                           double epsilon) {
    if (mean_rewards.empty()) throw ValidationError("sampler needs at least one type");
    if (epsilon <= 0.0) throw ValidationError("epsilon must be > 0");
    double shift = std::abs(*std::min_element(mean_rewards.begin(), mean_rewards.end()));
    std::vector<double> weights(mean_rewards.size());
    double total = 0.0;
    for (size_t i = 0; i < mean_rewards.size(); ++i) {
        weights[i] = 1.0 / (mean_rewards[i] + shift + epsilon);
        total += weights[i];
    }
    for (double &w : weights) w /= total;
    return weights;
}

std::vector<ReasoningTrajectory>
sample_refinement_batch(const std::vector<ExperienceBuffer> &buffers,
                        const std::vector<double> &probs, int batch_size, std::mt19937_64 &rng) {
    if (buffers.size() != probs.size())
        throw ValidationError("probability vector does not match buffer count");
    if (batch_size < 0) throw ValidationError("batch_size must be >= 0");
    double total = std::accumulate(probs.begin(), probs.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-9)
        throw ValidationError("probabilities sum to " + std::to_string(total) + ", expected 1");
    for (size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] < 0.0) throw ValidationError("negative sampling probability");
        if (probs[i] > 0.0 && buffers[i].empty())
            throw EmptyBufferError("buffer " + buffers[i].type_signature() +
                                   " has sampling probability but no trajectories");
    }

    std::vector<double> cdf(probs.size());
    std::partial_sum(probs.begin(), probs.end(), cdf.begin());
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    std::vector<ReasoningTrajectory> batch;
    batch.reserve(batch_size);
    for (int k = 0; k < batch_size; ++k) {
        double u = uniform(rng);
        size_t pick = std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
        while (pick < probs.size() && probs[pick] == 0.0) ++pick;
        if (pick >= probs.size()) pick = probs.size() - 1;
        const auto &trajectories = buffers[pick].trajectories();
        std::uniform_int_distribution<size_t> within(0, trajectories.size() - 1);
        batch.push_back(trajectories[within(rng)]);
    }
    return batch;
}

void export_dataset(const std::vector<FineTuneRecord> &records, const std::string &path,
                    DatasetKind kind, bool clamp_negative_weights) {
    if (records.empty()) throw ValidationError("refusing to export an empty dataset");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write dataset file: " + path);
    for (const auto &rec : records) {
        double weight = kind == DatasetKind::Imitation ? 1.0 : rec.weight;
        if (kind == DatasetKind::Refinement && clamp_negative_weights)
            weight = std::max(weight, 0.0);
        if (!std::isfinite(weight)) throw ValidationError("non-finite record weight");
        ordered_json j{{"prompt", rec.prompt}, {"response", rec.response}, {"weight", weight}};
        out << j.dump() << "\n";
    }
    if (!out) throw IoError("failed while writing " + path);
}

std::vector<FineTuneRecord> load_dataset(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset file: " + path);
    std::vector<FineTuneRecord> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            auto j = ordered_json::parse(line);
            out.push_back({j.at("prompt").get<std::string>(), j.at("response").get<std::string>(),
                           j.at("weight").get<double>()});
        } catch (const nlohmann::json::exception &e) {
            throw ParseError(path + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

// --- toy loss verifier ---------------------------------------------------------

ToyModel make_uniform_toy_model(int vocab_size) {
    ToyModel model;
    model.vocab_size = vocab_size;
    model.logits.assign((size_t)(vocab_size + 1) * vocab_size, 0.0);
    return model;
}

namespace {

void check_tokens(const ToyModel &model, const std::vector<int> &tokens) {
    for (int tok : tokens) {
        if (tok < 0 || tok >= model.vocab_size)
            throw VocabularyError("token " + std::to_string(tok) + " outside vocabulary [0, " +
                                  std::to_string(model.vocab_size) + ")");
    }
}

// log softmax(logits[ctx]) evaluated at `token`, with the row's softmax
// written to `probs`.
double log_prob(const ToyModel &model, int context, int token, std::vector<double> &probs) {
    const int v = model.vocab_size;
    double max_logit = model.logit(context, 0);
    for (int j = 1; j < v; ++j) max_logit = std::max(max_logit, model.logit(context, j));
    double denom = 0.0;
    for (int j = 0; j < v; ++j) {
        probs[j] = std::exp(model.logit(context, j) - max_logit);
        denom += probs[j];
    }
    for (int j = 0; j < v; ++j) probs[j] /= denom;
    return (model.logit(context, token) - max_logit) - std::log(denom);
}

} // namespace

double toy_nll(const ToyModel &model, const std::vector<std::vector<int>> &sequences) {
    if (model.vocab_size < 1) throw VocabularyError("toy model has an empty vocabulary");
    std::vector<double> probs(model.vocab_size);
    double loss = 0.0;
    for (const auto &tokens : sequences) {
        check_tokens(model, tokens);
        double seq_loglik = 0.0;
        int context = 0;
        for (int tok : tokens) {
            seq_loglik += log_prob(model, context, tok, probs);
            context = tok + 1;
        }
        loss += -seq_loglik;
    }
    return loss;
}

ToyLossResult toy_weighted_nll(const ToyModel &model, const std::vector<WeightedSequence> &batch) {
    if (model.vocab_size < 1) throw VocabularyError("toy model has an empty vocabulary");
    ToyLossResult result;
    result.gradient.assign(model.logits.size(), 0.0);
    std::vector<double> probs(model.vocab_size);
    for (const auto &seq : batch) {
        check_tokens(model, seq.tokens);
        double seq_loglik = 0.0;
        int context = 0;
        for (int tok : seq.tokens) {
            seq_loglik += log_prob(model, context, tok, probs);
            // d(-w log softmax(ctx)[tok]) / d logit(ctx, j) = w * (p_j - [j == tok])
            for (int j = 0; j < model.vocab_size; ++j) {
                double indicator = (j == tok) ? 1.0 : 0.0;
                result.gradient[(size_t)context * model.vocab_size + j] +=
                    seq.weight * (probs[j] - indicator);
            }
            context = tok + 1;
        }
        result.loss += seq.weight * -seq_loglik;
    }
    return result;
}

} // namespace regtsc
