#pragma once

#include <string>
#include <vector>

#include "regtsc/network.hpp"
#include "regtsc/rerag_types.hpp"
#include "regtsc/sim.hpp"

namespace regtsc {

// Lane-centric counts. Approaching vehicles are bucketed by thirds of the
// lane length; "near" is the third closest to the stop line.
struct LaneCounts {
    std::string lane_id;
    double lane_length = 0.0;
    int queued = 0;
    int far = 0;
    int mid = 0;
    int near = 0;
};

struct PhaseCounts {
    int phase_index = 0;
    std::vector<int> lane_slots; // indices into TrafficObservation::lanes
    int queued = 0;
    int far = 0;
    int mid = 0;
    int near = 0;
};

struct TrafficObservation {
    std::string intersection_id;
    std::string shape;
    std::vector<std::string> incoming_roads;
    std::vector<int> incoming_lane_counts; // aligned with incoming_roads
    int movement_count = 0;
    int phase_count = 0;
    // "from -> to" pairs per phase, pre-rendered in declaration order
    std::vector<std::vector<std::string>> phase_movements;
    std::vector<LaneCounts> lanes;   // upstream lanes in phase-first encounter order
    std::vector<PhaseCounts> phases;
};

enum class PromptMode { Regular, Emergency };

struct PromptBundle {
    std::string text;
    PromptMode mode = PromptMode::Regular;
    std::vector<std::string> sections;
};

// Static parts only (topology, action space, lane slots), all counts zero.
TrafficObservation observe_topology(const RoadNetwork &net, const Intersection &inter);

TrafficObservation observe(const Simulation &sim, const Intersection &inter);

// Fixture helpers: overwrite one lane's counts, then refresh phase totals.
void set_lane_counts(TrafficObservation &obs, const std::string &lane_id, int queued, int far,
                     int mid, int near);
void recompute_phase_totals(TrafficObservation &obs);

std::string observation_to_json(const TrafficObservation &obs);
TrafficObservation observation_from_json(const std::string &json_text);

PromptBundle render_regular_prompt(const TrafficObservation &obs);
PromptBundle render_emergency_prompt(const TrafficObservation &obs,
                                     const EmergencyVehicleState &ev,
                                     const std::vector<GuidanceItem> &guidance);

} // namespace regtsc
