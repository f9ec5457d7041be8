#include "regtsc/rerag.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "regtsc/errors.hpp"
#include "regtsc/prompt_assets.hpp"
#include "regtsc/util.hpp"

namespace regtsc {

using nlohmann::ordered_json;

// --- case (de)serialization --------------------------------------------------

namespace {

ordered_json ev_to_json(const EmergencyVehicleState &ev) {
    ordered_json j;
    j["vehicle_id"] = ev.vehicle_id;
    j["name"] = ev.name;
    j["planned_route"] = ev.planned_route;
    j["route_pos"] = ev.route_pos;
    j["current_lane"] = ev.current_lane;
    j["distance_to_stop_line"] = ev.distance_to_stop_line;
    j["speed"] = ev.speed;
    return j;
}

EmergencyVehicleState ev_from_json(const ordered_json &j) {
    EmergencyVehicleState ev;
    ev.vehicle_id = j.at("vehicle_id").get<int>();
    ev.name = j.at("name").get<std::string>();
    ev.planned_route = j.at("planned_route").get<std::vector<std::string>>();
    ev.route_pos = j.at("route_pos").get<int>();
    ev.current_lane = j.at("current_lane").get<std::string>();
    ev.distance_to_stop_line = j.at("distance_to_stop_line").get<double>();
    ev.speed = j.at("speed").get<double>();
    return ev;
}

const LaneCounts *find_lane(const TrafficObservation &obs, const std::string &lane_id) {
    for (const auto &lane : obs.lanes) {
        if (lane.lane_id == lane_id) return &lane;
    }
    return nullptr;
}

std::vector<int> phases_serving(const TrafficObservation &obs, const std::string &lane_id) {
    std::vector<int> out;
    for (const auto &phase : obs.phases) {
        for (int slot : phase.lane_slots) {
            if (obs.lanes[slot].lane_id == lane_id) {
                out.push_back(phase.phase_index);
                break;
            }
        }
    }
    return out;
}

std::string replace_placeholder(std::string text, const std::string &marker,
                                const std::string &value) {
    auto pos = text.find(marker);
    if (pos != std::string::npos) text.replace(pos, marker.size(), value);
    return text;
}

} // namespace

std::string historical_case_to_json(const HistoricalCase &c) {
    ordered_json j;
    j["obs"] = ordered_json::parse(observation_to_json(c.obs));
    j["ev"] = ev_to_json(c.ev);
    j["action"] = c.action;
    j["obs_next"] = ordered_json::parse(observation_to_json(c.obs_next));
    j["ev_next"] = ev_to_json(c.ev_next);
    return j.dump();
}

HistoricalCase historical_case_from_json(const std::string &json_text) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text);
    } catch (const nlohmann::json::exception &e) {
        throw ParseError(std::string("invalid case JSON: ") + e.what());
    }
    try {
        HistoricalCase c;
        c.obs = observation_from_json(j.at("obs").dump());
        c.ev = ev_from_json(j.at("ev"));
        c.action = j.at("action").get<int>();
        c.obs_next = observation_from_json(j.at("obs_next").dump());
        c.ev_next = ev_from_json(j.at("ev_next"));
        return c;
    } catch (const nlohmann::json::exception &e) {
        throw ParseError(std::string("malformed case document: ") + e.what());
    }
}

// --- reviewer ----------------------------------------------------------------

std::string build_reviewer_prompt(const std::vector<HistoricalCase> &cases) {
    std::ostringstream body;
    for (size_t k = 0; k < cases.size(); ++k) {
        const HistoricalCase &c = cases[k];
        body << "Case " << (k + 1) << ":\n";
        body << "Intersection: " << c.obs.intersection_id << " (" << c.obs.shape << ", "
             << c.obs.phase_count << " phases)\n";
        body << "Emergency vehicle: " << c.ev.name << "\n";
        const LaneCounts *lane = find_lane(c.obs, c.ev.current_lane);
        body << "Emergency vehicle lane: " << c.ev.current_lane << " (QV="
             << (lane ? lane->queued : 0) << "; AV=" << (lane ? lane->far : 0) << "/"
             << (lane ? lane->mid : 0) << "/" << (lane ? lane->near : 0) << ")\n";
        body << "Emergency vehicle position: " << format_fixed(c.ev.distance_to_stop_line, 1)
             << "m to stop line at " << format_fixed(c.ev.speed, 1) << "m/s\n";
        std::vector<int> serving = phases_serving(c.obs, c.ev.current_lane);
        body << "Phases serving the emergency lane: ";
        if (serving.empty()) {
            body << "none";
        } else {
            for (size_t i = 0; i < serving.size(); ++i) {
                if (i > 0) body << ", ";
                body << serving[i];
            }
        }
        body << "\n";
        body << "Expert-selected phase: " << c.action << "\n";
        const LaneCounts *lane_next = find_lane(c.obs_next, c.ev_next.current_lane);
        body << "Next-step queue on the emergency lane: QV=" << (lane_next ? lane_next->queued : 0)
             << "\n";
        body << "Next-step emergency vehicle position: "
             << format_fixed(c.ev_next.distance_to_stop_line, 1) << "m to stop line at "
             << format_fixed(c.ev_next.speed, 1) << "m/s\n";
        body << "\n";
    }
    return replace_placeholder(kReviewerPromptTemplate, "{{CASES}}", body.str());
}

namespace {

std::string extract_tag(const std::string &text, const std::string &tag, size_t from,
                        size_t *end_out) {
    std::string open = "<" + tag + ">";
    std::string close = "</" + tag + ">";
    auto b = text.find(open, from);
    if (b == std::string::npos) return {};
    auto e = text.find(close, b + open.size());
    if (e == std::string::npos) return {};
    if (end_out) *end_out = e + close.size();
    return text.substr(b + open.size(), e - b - open.size());
}

} // namespace

std::vector<GuidanceItem> parse_reviewer_reply(const std::string &reply) {
    std::vector<GuidanceItem> items;
    size_t pos = 0;
    int entry = 0;
    while (true) {
        auto block_start = reply.find("<guidance>", pos);
        if (block_start == std::string::npos) break;
        auto block_end = reply.find("</guidance>", block_start);
        if (block_end == std::string::npos)
            throw ParseError("guidance entry " + std::to_string(entry + 1) +
                             " has no closing tag");
        std::string block = reply.substr(block_start, block_end - block_start);
        ++entry;

        GuidanceItem item;
        item.situation = trim(extract_tag(block, "situation", 0, nullptr));
        item.recommended_action = trim(extract_tag(block, "action", 0, nullptr));
        item.intended_effect = trim(extract_tag(block, "effect", 0, nullptr));
        if (item.situation.empty())
            throw ParseError("guidance entry " + std::to_string(entry) +
                             " is missing field: situation");
        if (item.recommended_action.empty())
            throw ParseError("guidance entry " + std::to_string(entry) +
                             " is missing field: recommended_action");
        if (item.intended_effect.empty())
            throw ParseError("guidance entry " + std::to_string(entry) +
                             " is missing field: intended_effect");
        items.push_back(std::move(item));
        pos = block_end + 11;
    }
    if (items.empty()) throw ParseError("reviewer reply contains no <guidance> blocks");
    return items;
}

std::vector<GuidanceItem> review_cases(const std::vector<HistoricalCase> &cases,
                                       ChatBackend &backend) {
    if (cases.empty()) throw ValidationError("case base is empty");
    ChatRequest req;
    req.messages = {{"user", build_reviewer_prompt(cases)}};
    std::vector<GuidanceItem> raw = parse_reviewer_reply(backend.chat(req));

    // Distillation collapses repeated knowledge.
    std::vector<GuidanceItem> items;
    std::set<std::string> seen;
    for (auto &item : raw) {
        std::string key = item.situation + "\x1f" + item.recommended_action + "\x1f" +
                          item.intended_effect;
        if (!seen.insert(key).second) continue;
        char id[16];
        std::snprintf(id, sizeof(id), "g%03d", (int)items.size() + 1);
        item.id = id;
        items.push_back(std::move(item));
    }
    return items;
}

// --- embedding & retrieval -----------------------------------------------------

EmbeddingVector embed(const std::string &text, EmbeddingBackend &backend) {
    if (text.empty()) throw EmptyTextError("cannot embed an empty text");
    return backend.embed({text}).at(0);
}

std::string build_query_prompt(const TrafficObservation &obs, const EmergencyVehicleState &ev) {
    std::ostringstream ctx;
    ctx << "Intersection: " << obs.intersection_id << " (" << obs.shape << ", "
        << obs.phase_count << " phases)\n";
    ctx << "Emergency vehicle: " << ev.name << "\n";
    ctx << "Emergency vehicle lane: " << ev.current_lane << "\n";
    const LaneCounts *lane = find_lane(obs, ev.current_lane);
    std::string band = "en route";
    if (lane && lane->lane_length > 0.0) {
        double third = lane->lane_length / 3.0;
        if (ev.distance_to_stop_line < third) band = "near segment";
        else if (ev.distance_to_stop_line < 2.0 * third) band = "middle segment";
        else band = "far segment";
    }
    ctx << "Distance to stop line: " << format_fixed(ev.distance_to_stop_line, 1) << "m (" << band
        << ")\n";
    ctx << "Speed: " << format_fixed(ev.speed, 1) << "m/s\n";
    ctx << "Queued vehicles on the emergency lane: " << (lane ? lane->queued : 0) << "\n";
    int best_phase = 1, best_qv = -1;
    for (const auto &phase : obs.phases) {
        if (phase.queued > best_qv) {
            best_qv = phase.queued;
            best_phase = phase.phase_index;
        }
    }
    ctx << "Most congested phase: Phase " << best_phase << " (QV=" << std::max(best_qv, 0)
        << ")\n";
    return replace_placeholder(kQueryPromptTemplate, "{{CONTEXT}}", ctx.str());
}

std::string generate_query(const TrafficObservation &obs, const EmergencyVehicleState &ev,
                           ChatBackend &backend) {
    if (ev.current_lane.empty())
        throw ValidationError("query generation requires an emergency vehicle state");
    ChatRequest req;
    req.messages = {{"user", build_query_prompt(obs, ev)}};
    return trim(backend.chat(req));
}

double cosine_similarity(const EmbeddingVector &a, const EmbeddingVector &b) {
    if (a.dim() != b.dim())
        throw DimensionMismatchError("vector dims differ: " + std::to_string(a.dim()) + " vs " +
                                     std::to_string(b.dim()));
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.dim(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na == 0.0 || nb == 0.0) throw ZeroVectorError("cosine similarity of a zero vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

void check_scorable(const EmbeddingVector &query, const GuidanceRepository &repo) {
    double qn = 0.0;
    for (double x : query.values) qn += x * x;
    if (qn == 0.0) throw ZeroVectorError("query vector is all-zero");
    for (size_t i = 0; i < repo.vectors.size(); ++i) {
        if (repo.vectors[i].dim() != query.dim())
            throw DimensionMismatchError("repository vector " + std::to_string(i) + " has dim " +
                                         std::to_string(repo.vectors[i].dim()) +
                                         ", query has dim " + std::to_string(query.dim()));
    }
}

double score_one(const EmbeddingVector &query, const EmbeddingVector &item) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < query.dim(); ++i) {
        dot += query.values[i] * item.values[i];
        na += query.values[i] * query.values[i];
        nb += item.values[i] * item.values[i];
    }
    return dot / (std::sqrt(na) * std::sqrt(nb)); // nb == 0 yields NaN, caught after the scan
}

void throw_on_nan(const std::vector<double> &scores) {
    for (size_t i = 0; i < scores.size(); ++i) {
        if (std::isnan(scores[i]))
            throw ZeroVectorError("repository vector " + std::to_string(i) +
                                  " is all-zero or non-finite");
    }
}

std::vector<ScoredGuidance> top_k(const std::vector<double> &scores,
                                  const GuidanceRepository &repo, int k) {
    std::vector<int> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return repo.items[a].id < repo.items[b].id;
    });
    int take = std::min<int>(k, (int)scores.size());
    std::vector<ScoredGuidance> out;
    out.reserve(take);
    for (int i = 0; i < take; ++i) out.push_back({repo.items[order[i]], scores[order[i]]});
    return out;
}

} // namespace

void score_all(const EmbeddingVector &query, const GuidanceRepository &repo,
               std::vector<double> &scores_out) {
    check_scorable(query, repo);
    scores_out.assign(repo.vectors.size(), 0.0);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < (long)repo.vectors.size(); ++i) {
        scores_out[i] = score_one(query, repo.vectors[i]);
    }
    throw_on_nan(scores_out);
}

void score_all_serial(const EmbeddingVector &query, const GuidanceRepository &repo,
                      std::vector<double> &scores_out) {
    check_scorable(query, repo);
    scores_out.assign(repo.vectors.size(), 0.0);
    for (size_t i = 0; i < repo.vectors.size(); ++i) {
        scores_out[i] = score_one(query, repo.vectors[i]);
    }
    throw_on_nan(scores_out);
}

std::vector<ScoredGuidance> retrieve(const EmbeddingVector &query, const GuidanceRepository &repo,
                                     int k) {
    if (repo.empty()) throw EmptyRepositoryError("guidance repository is empty");
    if (k < 1) throw ValidationError("retrieval K must be >= 1");
    std::vector<double> scores;
    score_all(query, repo, scores);
    return top_k(scores, repo, k);
}

std::vector<ScoredGuidance> retrieve_serial(const EmbeddingVector &query,
                                            const GuidanceRepository &repo, int k) {
    if (repo.empty()) throw EmptyRepositoryError("guidance repository is empty");
    if (k < 1) throw ValidationError("retrieval K must be >= 1");
    std::vector<double> scores;
    score_all_serial(query, repo, scores);
    return top_k(scores, repo, k);
}

// --- persistence ----------------------------------------------------------------

void save_repository(const GuidanceRepository &repo, const std::string &items_path,
                     const std::string &vectors_path) {
    if (repo.items.size() != repo.vectors.size())
        throw ValidationError("repository items and vectors are misaligned");
    std::ofstream items(items_path);
    if (!items) throw IoError("cannot write " + items_path);
    for (const auto &item : repo.items) {
        ordered_json j{{"id", item.id},
                       {"situation", item.situation},
                       {"recommended_action", item.recommended_action},
                       {"intended_effect", item.intended_effect}};
        items << j.dump() << "\n";
    }
    ordered_json vecs;
    vecs["dim"] = repo.vectors.empty() ? 0 : (int)repo.vectors[0].dim();
    vecs["vectors"] = ordered_json::array();
    for (const auto &v : repo.vectors) vecs["vectors"].push_back(v.values);
    std::ofstream vectors(vectors_path);
    if (!vectors) throw IoError("cannot write " + vectors_path);
    vectors << vecs.dump(2) << "\n";
}

GuidanceRepository load_repository(const std::string &items_path,
                                   const std::string &vectors_path) {
    GuidanceRepository repo;
    std::ifstream items(items_path);
    if (!items) throw IoError("cannot open " + items_path);
    std::string line;
    int line_no = 0;
    while (std::getline(items, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            auto j = ordered_json::parse(line);
            GuidanceItem item;
            item.id = j.at("id").get<std::string>();
            item.situation = j.at("situation").get<std::string>();
            item.recommended_action = j.at("recommended_action").get<std::string>();
            item.intended_effect = j.at("intended_effect").get<std::string>();
            if (item.situation.empty() || item.recommended_action.empty() ||
                item.intended_effect.empty())
                throw ParseError("guidance item has empty fields");
            repo.items.push_back(std::move(item));
        } catch (const nlohmann::json::exception &e) {
            throw ParseError(items_path + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    std::ifstream vectors(vectors_path);
    if (!vectors) throw IoError("cannot open " + vectors_path);
    try {
        ordered_json j;
        vectors >> j;
        for (const auto &vec : j.at("vectors"))
            repo.vectors.push_back({vec.get<std::vector<double>>()});
    } catch (const nlohmann::json::exception &e) {
        throw ParseError(vectors_path + ": " + std::string(e.what()));
    }
    if (repo.items.size() != repo.vectors.size())
        throw ValidationError("repository files disagree: " + std::to_string(repo.items.size()) +
                              " items vs " + std::to_string(repo.vectors.size()) + " vectors");
    for (size_t i = 1; i < repo.vectors.size(); ++i) {
        if (repo.vectors[i].dim() != repo.vectors[0].dim())
            throw ValidationError("repository vectors have mixed dimensions");
    }
    return repo;
}

std::string guidance_text(const GuidanceItem &item) {
    return item.situation + "\n" + item.recommended_action + "\n" + item.intended_effect;
}

GuidanceRepository build_repository(const std::vector<HistoricalCase> &cases,
                                    ChatBackend &chat_backend, EmbeddingBackend &embed_backend) {
    GuidanceRepository repo;
    repo.items = review_cases(cases, chat_backend);
    std::vector<std::string> texts;
    texts.reserve(repo.items.size());
    for (const auto &item : repo.items) texts.push_back(guidance_text(item));
    repo.vectors = embed_backend.embed(texts);
    return repo;
}

// --- canned case base -------------------------------------------------------------

std::vector<HistoricalCase> builtin_case_base() {
    RoadNetwork net = make_cross();
    const Intersection &inter = net.intersections.at(0);
    TrafficObservation blank = observe_topology(net, inter);

    auto ev_on = [](const std::string &lane, double dist, double speed) {
        EmergencyVehicleState ev;
        ev.vehicle_id = 0;
        ev.name = "Ambulance_1";
        ev.planned_route = {lane};
        ev.route_pos = 0;
        ev.current_lane = lane;
        ev.distance_to_stop_line = dist;
        ev.speed = speed;
        return ev;
    };

    std::vector<HistoricalCase> cases;

    // Blocked approach: the expert clears the emergency vehicle's lane.
    {
        HistoricalCase c;
        c.obs = blank;
        set_lane_counts(c.obs, "road#2_1", 5, 2, 1, 1);
        set_lane_counts(c.obs, "road#1_2", 4, 0, 3, 0);
        c.ev = ev_on("road#2_1", 276.8, 17.4);
        c.action = 4;
        c.obs_next = blank;
        set_lane_counts(c.obs_next, "road#2_1", 2, 0, 0, 1);
        c.ev_next = ev_on("road#2_1", 80.0, 13.9);
        cases.push_back(std::move(c));
    }

    // Clear approach: keep the serving phase active.
    {
        HistoricalCase c;
        c.obs = blank;
        set_lane_counts(c.obs, "road#3_1", 0, 1, 0, 0);
        set_lane_counts(c.obs, "road#4_2", 3, 1, 1, 1);
        c.ev = ev_on("road#3_1", 120.0, 13.9);
        c.action = 2;
        c.obs_next = blank;
        c.ev_next = ev_on("road#3_1", 50.5, 13.9);
        cases.push_back(std::move(c));
    }

    // Distant emergency vehicle: the expert relieves the heaviest queue first.
    {
        HistoricalCase c;
        c.obs = blank;
        set_lane_counts(c.obs, "road#1_2", 6, 2, 2, 2);
        set_lane_counts(c.obs, "road#2_1", 1, 0, 0, 0);
        EmergencyVehicleState far_ev = ev_on("road#9_1", 900.0, 13.9);
        far_ev.planned_route = {"road#9_1", "road#2_1"};
        c.ev = far_ev;
        c.action = 1;
        c.obs_next = blank;
        set_lane_counts(c.obs_next, "road#1_2", 2, 1, 1, 0);
        c.ev_next = ev_on("road#9_1", 550.0, 13.9);
        cases.push_back(std::move(c));
    }
    return cases;
}

} // namespace regtsc
