#pragma once

#include <string>
#include <utility>
#include <vector>

#include "regtsc/gateway.hpp"
#include "regtsc/observation.hpp"
#include "regtsc/rerag_types.hpp"

namespace regtsc {

// One historical emergency case: state, expert action, next state.
struct HistoricalCase {
    TrafficObservation obs;
    EmergencyVehicleState ev;
    int action = 0; // phase index chosen by the expert
    TrafficObservation obs_next;
    EmergencyVehicleState ev_next;
};

std::string historical_case_to_json(const HistoricalCase &c);
HistoricalCase historical_case_from_json(const std::string &json_text);

// Reviewer pass: serialize the cases into the reviewer prompt, one backend
// round-trip, parse the tagged reply into guidance items. Duplicate items
// are collapsed, so the repository can be smaller than the case base.
std::vector<GuidanceItem> review_cases(const std::vector<HistoricalCase> &cases,
                                       ChatBackend &backend);

std::string build_reviewer_prompt(const std::vector<HistoricalCase> &cases);
std::vector<GuidanceItem> parse_reviewer_reply(const std::string &reply);

EmbeddingVector embed(const std::string &text, EmbeddingBackend &backend);

// Canonical text embedded for a guidance item.
std::string guidance_text(const GuidanceItem &item);

std::string build_query_prompt(const TrafficObservation &obs, const EmergencyVehicleState &ev);
std::string generate_query(const TrafficObservation &obs, const EmergencyVehicleState &ev,
                           ChatBackend &backend);

double cosine_similarity(const EmbeddingVector &a, const EmbeddingVector &b);

struct ScoredGuidance {
    GuidanceItem item;
    double score = 0.0;
};

// Cosine scores of the query against every repository vector. The parallel
// kernel writes disjoint slots, so its output is identical to the serial
// reference kept for tests and the benchmark.
void score_all(const EmbeddingVector &query, const GuidanceRepository &repo,
               std::vector<double> &scores_out);
void score_all_serial(const EmbeddingVector &query, const GuidanceRepository &repo,
                      std::vector<double> &scores_out);

// Top-K by descending score, ties broken by ascending item id.
std::vector<ScoredGuidance> retrieve(const EmbeddingVector &query,
                                     const GuidanceRepository &repo, int k);
std::vector<ScoredGuidance> retrieve_serial(const EmbeddingVector &query,
                                            const GuidanceRepository &repo, int k);

// guidance.jsonl (one item per line) + <prefix>.vectors.json.
void save_repository(const GuidanceRepository &repo, const std::string &items_path,
                     const std::string &vectors_path);
GuidanceRepository load_repository(const std::string &items_path,
                                   const std::string &vectors_path);

GuidanceRepository build_repository(const std::vector<HistoricalCase> &cases,
                                    ChatBackend &chat_backend, EmbeddingBackend &embed_backend);

// Small canned case base used when a run needs guidance but no repository
// file was supplied.
std::vector<HistoricalCase> builtin_case_base();

} // namespace regtsc
