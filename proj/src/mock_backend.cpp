#include <cmath>
#include <cstdlib>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "regtsc/errors.hpp"
#include "regtsc/gateway.hpp"
#include "regtsc/util.hpp"

namespace regtsc {

EmbeddingVector mock_embed(const std::string &text, int dim) {
    std::vector<std::string> tokens = tokenize(text);
    if (tokens.empty()) throw EmptyTextError("cannot embed a text without tokens");
    EmbeddingVector v;
    v.values.assign(dim, 0.0);
    for (const auto &tok : tokens) {
        v.values[fnv1a64(tok) % (uint64_t)dim] += 1.0;
    }
    double norm = 0.0;
    for (double x : v.values) norm += x * x;
    norm = std::sqrt(norm);
    for (double &x : v.values) x /= norm;
    return v;
}

namespace {

std::vector<std::string> split_lines(const std::string &text) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            lines.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) lines.push_back(cur);
    return lines;
}

bool starts_with(const std::string &s, const std::string &prefix) {
    return s.rfind(prefix, 0) == 0;
}

std::optional<int> parse_int(const std::string &s) {
    std::string t = trim(s);
    if (t.empty()) return std::nullopt;
    char *end = nullptr;
    long v = std::strtol(t.c_str(), &end, 10);
    if (end != t.c_str() + t.size()) return std::nullopt;
    return (int)v;
}

std::optional<double> parse_double_prefix(const std::string &s) {
    char *end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str()) return std::nullopt;
    return v;
}

// Per-phase totals and lane-to-phase assignments from the "Queuing and
// Approaching Vehicles" table. Table blocks start with a bare "Phase <k>:".
struct PromptState {
    struct PhaseInfo {
        int queued = 0;
        int near = 0;
    };
    std::map<int, PhaseInfo> phases;
    std::map<std::string, int> lane_phase; // lowest phase listing the lane
    std::string ev_name;
    std::string ev_lane;
    double ev_distance = 0.0;
    double ev_speed = 0.0;
    bool has_ev = false;
};

PromptState parse_decision_prompt(const std::string &prompt) {
    PromptState st;
    int current_phase = 0;
    bool in_ev_block = false;
    for (const std::string &line : split_lines(prompt)) {
        if (starts_with(line, "Phase ") && line.back() == ':') {
            auto idx = parse_int(line.substr(6, line.size() - 7));
            if (idx) {
                current_phase = *idx;
                st.phases.try_emplace(current_phase);
            }
            continue;
        }
        if (line == "Emergency Vehicle State:") {
            in_ev_block = true;
            current_phase = 0;
            continue;
        }
        if (in_ev_block) {
            if (starts_with(line, "Emergency Vehicle ID: ")) {
                st.ev_name = trim(line.substr(22));
            } else if (starts_with(line, "Current Position: ")) {
                std::string rest = line.substr(18);
                auto comma = rest.find(", ");
                if (comma != std::string::npos) {
                    st.ev_lane = rest.substr(0, comma);
                    if (auto d = parse_double_prefix(rest.substr(comma + 2))) {
                        st.ev_distance = *d;
                        st.has_ev = true;
                    }
                }
            } else if (starts_with(line, "Speed: ")) {
                if (auto v = parse_double_prefix(line.substr(7))) st.ev_speed = *v;
            } else if (line.empty()) {
                in_ev_block = false;
            }
            continue;
        }
        if (current_phase > 0) {
            auto qv = line.find(": QV=");
            auto av = line.find("; AV=");
            if (qv == std::string::npos || av == std::string::npos) {
                current_phase = line.empty() ? 0 : current_phase;
                continue;
            }
            auto queued = parse_int(line.substr(qv + 5, av - (qv + 5)));
            std::string counts = line.substr(av + 5); // far/mid/near
            auto s1 = counts.find('/');
            auto s2 = counts.rfind('/');
            if (!queued || s1 == std::string::npos || s2 == s1) continue;
            auto near = parse_int(counts.substr(s2 + 1));
            if (!near) continue;
            std::string label = line.substr(0, qv);
            if (label == "Total") {
                st.phases[current_phase].queued = *queued;
                st.phases[current_phase].near = *near;
            } else if (!st.lane_phase.count(label)) {
                st.lane_phase[label] = current_phase;
            }
        }
    }
    return st;
}

int busiest_phase(const PromptState &st) {
    int best = 1;
    int best_score = -1;
    for (const auto &[idx, info] : st.phases) {
        int score = info.queued + info.near;
        if (score > best_score) {
            best_score = score;
            best = idx;
        }
    }
    return best;
}

std::string pressure_summary(const PromptState &st) {
    std::ostringstream out;
    out << "Phase pressures (QV+near):";
    bool first = true;
    for (const auto &[idx, info] : st.phases) {
        out << (first ? " " : ", ") << "phase " << idx << "=" << (info.queued + info.near);
        first = false;
    }
    out << ".";
    return out.str();
}

std::string decision_response(const std::string &prompt) {
    PromptState st = parse_decision_prompt(prompt);
    bool emergency = prompt.find("Emergency Vehicle State:") != std::string::npos;

    if (!emergency) {
        int phase = busiest_phase(st);
        const auto &info = st.phases.count(phase) ? st.phases.at(phase) : PromptState::PhaseInfo{};
        std::ostringstream out;
        out << "<response>\n<evaluation and explanation>Phase " << phase
            << " carries the highest pressure (QV=" << info.queued << " plus " << info.near
            << " near the stop line); serving it reduces overall delay. " << pressure_summary(st)
            << "</evaluation and explanation>\n<signal>" << phase << "</signal>\n</response>";
        return out.str();
    }

    int phase;
    std::ostringstream analysis, evaluation;
    auto it = st.has_ev ? st.lane_phase.find(st.ev_lane) : st.lane_phase.end();
    if (it != st.lane_phase.end()) {
        phase = it->second;
        analysis << "Emergency vehicle " << st.ev_name << " is on lane " << st.ev_lane << ", "
                 << format_fixed(st.ev_distance, 1) << "m from the stop line at "
                 << format_fixed(st.ev_speed, 1) << "m/s. Lane " << st.ev_lane
                 << " is served by phase " << phase << ". " << pressure_summary(st);
        if (st.ev_speed > 0.0) {
            evaluation << "At current speed the emergency vehicle reaches the stop line in "
                       << format_fixed(st.ev_distance / st.ev_speed, 1) << "s. ";
        } else {
            evaluation << "The emergency vehicle is stopped in the queue. ";
        }
        evaluation << "Activating phase " << phase
                   << " clears the queue ahead of it; any other phase would delay the "
                      "emergency vehicle.";
    } else {
        phase = busiest_phase(st);
        const auto &info = st.phases.count(phase) ? st.phases.at(phase) : PromptState::PhaseInfo{};
        analysis << "The emergency vehicle"
                 << (st.ev_name.empty() ? "" : " " + st.ev_name)
                 << " is not on an approach of this intersection yet. " << pressure_summary(st);
        evaluation << "Phase " << phase << " carries the highest pressure (QV=" << info.queued
                   << " plus " << info.near
                   << " near the stop line); serving it clears congestion before the emergency "
                      "vehicle arrives.";
    }

    std::ostringstream out;
    out << "<response>\n<traffic analysis>" << analysis.str()
        << "</traffic analysis>\n<evaluation and explanation>" << evaluation.str()
        << "</evaluation and explanation>\n<signal>" << phase << "</signal>\n</response>";
    return out.str();
}

// --- reviewer ---------------------------------------------------------------

struct ReviewerCase {
    int ev_lane_queue = 0;
    std::vector<int> serving_phases;
    int expert_phase = 0;
};

std::vector<ReviewerCase> parse_reviewer_cases(const std::string &prompt) {
    std::vector<ReviewerCase> cases;
    ReviewerCase cur;
    bool open = false;
    auto flush = [&]() {
        if (open) cases.push_back(cur);
        cur = ReviewerCase{};
    };
    for (const std::string &line : split_lines(prompt)) {
        if (starts_with(line, "Case ") && line.back() == ':') {
            flush();
            open = true;
        } else if (starts_with(line, "Emergency vehicle lane: ")) {
            auto qv = line.find("(QV=");
            if (qv != std::string::npos) {
                if (auto q = parse_double_prefix(line.substr(qv + 4))) cur.ev_lane_queue = (int)*q;
            }
        } else if (starts_with(line, "Phases serving the emergency lane: ")) {
            std::stringstream ss(line.substr(35));
            std::string tok;
            while (std::getline(ss, tok, ',')) {
                if (auto p = parse_int(tok)) cur.serving_phases.push_back(*p);
            }
        } else if (starts_with(line, "Expert-selected phase: ")) {
            if (auto p = parse_int(line.substr(23))) cur.expert_phase = *p;
        }
    }
    flush();
    return cases;
}

void append_guidance(std::ostringstream &out, const char *situation, const char *action,
                     const char *effect) {
    out << "<guidance>\n<situation>" << situation << "</situation>\n<action>" << action
        << "</action>\n<effect>" << effect << "</effect>\n</guidance>\n";
}

std::string reviewer_response(const std::string &prompt) {
    std::ostringstream out;
    for (const ReviewerCase &c : parse_reviewer_cases(prompt)) {
        bool serves_ev = std::find(c.serving_phases.begin(), c.serving_phases.end(),
                                   c.expert_phase) != c.serving_phases.end();
        if (serves_ev && c.ev_lane_queue > 0) {
            append_guidance(out,
                            "An emergency vehicle is approaching the intersection, but its lane "
                            "is still occupied by queuing vehicles.",
                            "Promptly select the signal phase for the lane with the emergency "
                            "vehicle.",
                            "Clear the queuing vehicles in the lane with the emergency vehicle "
                            "for it rapid passage.");
        } else if (serves_ev) {
            append_guidance(out,
                            "An emergency vehicle is approaching the intersection and its lane "
                            "is clear of queuing vehicles.",
                            "Keep the signal phase serving the emergency vehicle's lane active "
                            "until it has passed.",
                            "The emergency vehicle passes the intersection without stopping.");
        } else {
            append_guidance(out,
                            "An emergency vehicle is still distant from the intersection while "
                            "other approaches carry heavy queues.",
                            "Serve the most congested phase now and switch to the emergency "
                            "vehicle's phase before it arrives.",
                            "Overall congestion is reduced without delaying the emergency "
                            "vehicle.");
        }
    }
    return out.str();
}

// --- query generator ----------------------------------------------------------

std::string query_response(const std::string &prompt) {
    std::string lane = "unknown lane", band = "en route", speed = "0.0", queued = "0",
                phase = "1";
    for (const std::string &line : split_lines(prompt)) {
        if (starts_with(line, "Emergency vehicle lane: ")) {
            lane = trim(line.substr(24));
        } else if (starts_with(line, "Distance to stop line: ")) {
            auto open = line.find('(');
            auto close = line.rfind(')');
            if (open != std::string::npos && close != std::string::npos && close > open)
                band = line.substr(open + 1, close - open - 1);
        } else if (starts_with(line, "Speed: ")) {
            if (auto v = parse_double_prefix(line.substr(7))) speed = format_fixed(*v, 1);
        } else if (starts_with(line, "Queued vehicles on the emergency lane: ")) {
            queued = trim(line.substr(39));
        } else if (starts_with(line, "Most congested phase: Phase ")) {
            auto rest = line.substr(28);
            auto sp = rest.find(' ');
            phase = trim(sp == std::string::npos ? rest : rest.substr(0, sp));
        }
    }
    return "emergency vehicle approaching on lane " + lane + ", " + band + ", speed " + speed +
           "m/s, " + queued + " queued vehicles ahead, heaviest queue at phase " + phase;
}

} // namespace

std::string mock_chat_response(const std::string &prompt) {
    if (prompt.find("traffic engineering reviewer") != std::string::npos)
        return reviewer_response(prompt);
    if (prompt.find("query generator") != std::string::npos) return query_response(prompt);
    return decision_response(prompt);
}

} // namespace regtsc
