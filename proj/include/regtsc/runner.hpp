#pragma once

#include <optional>
#include <string>
#include <vector>

#include "regtsc/agent.hpp"
#include "regtsc/gateway.hpp"
#include "regtsc/network.hpp"
#include "regtsc/rerag.hpp"
#include "regtsc/sim.hpp"
#include "regtsc/training.hpp"

namespace regtsc {

enum class Policy { MockHeuristic, Remote, FixedTime, Random };

const char *policy_name(Policy policy);
Policy policy_from_name(const std::string &name);

struct Scenario {
    std::string network_ref; // path or builtin:<name>
    SimulationConfig config;
    std::optional<Policy> default_policy;
    std::string source_path; // where the scenario was loaded from
};

Scenario load_scenario(const std::string &path);

struct RunManifest {
    std::string scenario_path;
    Policy policy = Policy::MockHeuristic;
    BackendConfig backend;
    std::string out_dir;                 // empty = no artifacts written
    std::optional<uint64_t> seed;        // overrides the scenario seed
    std::optional<int> decision_interval;
    int retrieval_k = 1;
    RewardParams reward;
    std::string guidance_items_path;     // empty = built-in canned repository
    std::string guidance_vectors_path;
    std::string case_log_path;           // when set, emergency cases are appended here
    bool write_step_log = false;

    void validate() const;
};

struct DecisionRecord {
    int step = 0;
    std::string intersection_id;
    ReasoningMode mode = ReasoningMode::Lightweight;
    int phase = 1;
    bool fallback_used = false;
    std::string prompt_hash;
    std::string response_hash;
};

struct RunResult {
    MetricsReport metrics;
    std::vector<DecisionRecord> decisions;
    std::vector<ExperienceBuffer> buffers;           // one per intersection type
    std::vector<ReasoningTrajectory> trajectories;   // decision order, rewards filled in
};

// Full per-decision-point loop: observe, gate, retrieve guidance for deep
// mode, decide, act, reward, buffer-append. Deterministic for the built-in
// policies. Writes metrics.json / decisions.jsonl / buffer snapshots under
// out_dir when set.
RunResult run(const RunManifest &manifest);

struct CollectStats {
    int captured = 0;
    int kept = 0;
    int dropped_by_filter = 0;
    int dropped_no_window = 0;
};

// Imitation collection: run, then apply the reward-based filter over each
// trajectory's forward window and export kept records with weight 1.0.
// filter_disabled keeps everything (the eta = -inf sentinel).
CollectStats collect_imitation(const RunManifest &manifest, const FilterParams &filter,
                               const std::string &dataset_path, bool filter_disabled = false);

// Reviewer + embedding over a case log; writes guidance.jsonl + vectors.
GuidanceRepository build_guidance(const std::string &case_log_path,
                                  const BackendConfig &backend,
                                  const std::string &items_out, const std::string &vectors_out);

struct ComparisonRow {
    std::string policy;
    MetricsReport metrics;
    double att_delta_pct = 0.0; // vs baseline, negative = better
    double awt_delta_pct = 0.0;
    double aql_delta_pct = 0.0;
};

struct ComparisonReport {
    std::string baseline;
    std::vector<ComparisonRow> rows;
};

// All manifests must share scenario and seed (ScenarioMismatchError).
ComparisonReport compare(const std::vector<RunManifest> &manifests,
                         const std::string &baseline_policy, const std::string &csv_out);

std::string comparison_to_csv(const ComparisonReport &report);
std::string comparison_to_json(const ComparisonReport &report);

} // namespace regtsc
