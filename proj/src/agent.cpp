#include "regtsc/agent.hpp"

#include <algorithm>
#include <charconv>

#include "regtsc/errors.hpp"
#include "regtsc/util.hpp"

namespace regtsc {

const char *reasoning_mode_name(ReasoningMode mode) {
    return mode == ReasoningMode::Deep ? "Deep" : "Lightweight";
}

ReasoningMode select_mode(const RoadNetwork &net, const Intersection &inter,
                          const std::vector<EmergencyVehicleState> &active_emergencies) {
    for (const auto &ev : active_emergencies) {
        for (size_t i = ev.route_pos; i < ev.planned_route.size(); ++i) {
            const Intersection *head = net.head_intersection(ev.planned_route[i]);
            if (head && head->id == inter.id) return ReasoningMode::Deep;
        }
    }
    return ReasoningMode::Lightweight;
}

namespace {

std::optional<std::string> optional_tag(const std::string &text, const std::string &tag) {
    std::string open = "<" + tag + ">";
    std::string close = "</" + tag + ">";
    auto b = text.find(open);
    if (b == std::string::npos) return std::nullopt;
    auto e = text.find(close, b + open.size());
    if (e == std::string::npos) return std::nullopt;
    return text.substr(b + open.size(), e - b - open.size());
}

} // namespace

ParsedResponse parse_response(const std::string &text, int phase_count) {
    ParsedResponse parsed;
    parsed.analysis = optional_tag(text, "traffic analysis");
    parsed.explanation = optional_tag(text, "evaluation and explanation");

    auto open = text.find("<signal>");
    if (open == std::string::npos) throw MissingTagError("response has no <signal> tag");
    auto close = text.find("</signal>", open + 8);
    if (close == std::string::npos) throw MissingTagError("response has no </signal> tag");
    std::string body = trim(text.substr(open + 8, close - open - 8));
    if (body.empty()) throw NonIntegerPhaseError("empty <signal> body");

    int phase = 0;
    auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), phase);
    if (ec != std::errc() || ptr != body.data() + body.size())
        throw NonIntegerPhaseError("<signal> body is not an integer: \"" + body + "\"");
    if (phase < 1 || phase > phase_count)
        throw PhaseOutOfRangeError("phase " + std::to_string(phase) + " outside [1, " +
                                   std::to_string(phase_count) + "]");
    parsed.phase = phase;
    return parsed;
}

int fallback_policy(const TrafficObservation &obs, const EmergencyVehicleState *ev) {
    if (ev) {
        for (const auto &phase : obs.phases) {
            for (int slot : phase.lane_slots) {
                if (obs.lanes[slot].lane_id == ev->current_lane) return phase.phase_index;
            }
        }
    }
    int best = obs.phases.empty() ? 1 : obs.phases.front().phase_index;
    int best_score = -1;
    for (const auto &phase : obs.phases) {
        int score = phase.queued + phase.near;
        if (score > best_score) {
            best_score = score;
            best = phase.phase_index;
        }
    }
    return best;
}

AgentDecision decide(const TrafficObservation &obs, ReasoningMode mode,
                     const EmergencyVehicleState *ev,
                     const std::vector<GuidanceItem> *guidance, ChatBackend &backend,
                     const std::string &model) {
    static const std::vector<GuidanceItem> no_guidance;
    if (mode == ReasoningMode::Deep && ev == nullptr)
        throw ValidationError("deep reasoning requires an emergency vehicle state");

    PromptBundle prompt = mode == ReasoningMode::Deep
                              ? render_emergency_prompt(obs, *ev, guidance ? *guidance : no_guidance)
                              : render_regular_prompt(obs);

    AgentDecision decision;
    decision.mode = mode;
    decision.prompt = prompt.text;

    ChatRequest req;
    req.model = model;
    req.messages = {{"user", prompt.text}};

    try {
        decision.response = backend.chat(req);
        ParsedResponse parsed = parse_response(decision.response, obs.phase_count);
        if (mode == ReasoningMode::Deep && !parsed.analysis)
            throw MissingTagError("deep response has no <traffic analysis> tag");
        decision.phase = parsed.phase;
        decision.explanation = parsed.explanation.value_or("");
        if (mode == ReasoningMode::Deep) {
            decision.analysis = parsed.analysis;
            decision.prediction = parsed.explanation.value_or("");
        }
        return decision;
    } catch (const BackendError &) {
    } catch (const ParseError &) {
    }

    decision.phase = fallback_policy(obs, mode == ReasoningMode::Deep ? ev : nullptr);
    decision.fallback_used = true;
    decision.explanation = "fallback: deterministic pressure rule";
    if (mode == ReasoningMode::Deep) {
        decision.analysis = "fallback: backend reply unusable";
        decision.prediction = "fallback: deterministic pressure rule";
    }
    return decision;
}

} // namespace regtsc
