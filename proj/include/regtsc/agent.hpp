#pragma once

#include <optional>
#include <string>
#include <vector>

#include "regtsc/gateway.hpp"
#include "regtsc/network.hpp"
#include "regtsc/observation.hpp"
#include "regtsc/sim.hpp"

namespace regtsc {

enum class ReasoningMode { Deep, Lightweight };

const char *reasoning_mode_name(ReasoningMode mode);

struct AgentDecision {
    int phase = 1;
    std::string explanation;
    std::optional<std::string> analysis;   // Deep mode only
    std::optional<std::string> prediction; // Deep mode only
    ReasoningMode mode = ReasoningMode::Lightweight;
    bool fallback_used = false;
    std::string prompt;   // exact prompt sent
    std::string response; // raw backend reply ("" when fallback skipped the round-trip)
};

struct ParsedResponse {
    std::optional<std::string> analysis;
    std::optional<std::string> explanation;
    int phase = 0;
};

// Deep iff some emergency vehicle is currently on an approach of this
// intersection or the intersection lies on its remaining planned route.
ReasoningMode select_mode(const RoadNetwork &net, const Intersection &inter,
                          const std::vector<EmergencyVehicleState> &active_emergencies);

// Extracts <traffic analysis>, <evaluation and explanation> and <signal>.
// Throws MissingTagError / NonIntegerPhaseError / PhaseOutOfRangeError.
ParsedResponse parse_response(const std::string &text, int phase_count);

// Deterministic safe decision: serve the emergency vehicle's lane when it is
// on an approach, otherwise the phase with the largest queued + near count.
int fallback_policy(const TrafficObservation &obs, const EmergencyVehicleState *ev);

// One decision round-trip; never throws on backend or parse failure — the
// fallback policy is total.
AgentDecision decide(const TrafficObservation &obs, ReasoningMode mode,
                     const EmergencyVehicleState *ev,
                     const std::vector<GuidanceItem> *guidance, ChatBackend &backend,
                     const std::string &model = "mock");

} // namespace regtsc
