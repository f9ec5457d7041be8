#include "regtsc/observation.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

#include "regtsc/errors.hpp"
#include "regtsc/util.hpp"

namespace regtsc {

namespace {

// "road#2_1" -> "road#2"; lane ids carry the road id plus "_<index>".
std::string road_of_lane(const std::string &lane_id) {
    auto pos = lane_id.rfind('_');
    if (pos == std::string::npos || pos + 1 >= lane_id.size()) return lane_id;
    for (size_t i = pos + 1; i < lane_id.size(); ++i) {
        if (lane_id[i] < '0' || lane_id[i] > '9') return lane_id;
    }
    return lane_id.substr(0, pos);
}

} // namespace

TrafficObservation observe_topology(const RoadNetwork &net, const Intersection &inter) {
    TrafficObservation obs;
    obs.intersection_id = inter.id;
    obs.shape = shape_name(inter.shape);
    obs.movement_count = (int)inter.movements.size();
    obs.phase_count = (int)inter.phases.size();

    for (const auto &lane_id : inter.upstream_lanes) {
        std::string road = net.lane(lane_id).road;
        auto it = std::find(obs.incoming_roads.begin(), obs.incoming_roads.end(), road);
        if (it == obs.incoming_roads.end()) {
            obs.incoming_roads.push_back(road);
            obs.incoming_lane_counts.push_back(1);
        } else {
            obs.incoming_lane_counts[it - obs.incoming_roads.begin()] += 1;
        }
    }

    for (const auto &phase : inter.phases) {
        std::vector<std::string> rendered;
        for (int mi : phase.movements) {
            const auto &m = inter.movements[mi];
            rendered.push_back(m.from_lane + " → " + m.to_lane);
        }
        obs.phase_movements.push_back(std::move(rendered));
    }

    // Lanes in phase-first encounter order; a lane serving several phases
    // keeps its first slot.
    auto lane_slot = [&](const std::string &lane_id) -> int {
        for (size_t i = 0; i < obs.lanes.size(); ++i) {
            if (obs.lanes[i].lane_id == lane_id) return (int)i;
        }
        LaneCounts lc;
        lc.lane_id = lane_id;
        lc.lane_length = net.lane(lane_id).length;
        obs.lanes.push_back(std::move(lc));
        return (int)obs.lanes.size() - 1;
    };

    for (const auto &phase : inter.phases) {
        PhaseCounts pc;
        pc.phase_index = phase.index;
        for (int mi : phase.movements) {
            int slot = lane_slot(inter.movements[mi].from_lane);
            if (std::find(pc.lane_slots.begin(), pc.lane_slots.end(), slot) == pc.lane_slots.end())
                pc.lane_slots.push_back(slot);
        }
        obs.phases.push_back(std::move(pc));
    }
    return obs;
}

void recompute_phase_totals(TrafficObservation &obs) {
    for (auto &pc : obs.phases) {
        pc.queued = pc.far = pc.mid = pc.near = 0;
        for (int slot : pc.lane_slots) {
            pc.queued += obs.lanes[slot].queued;
            pc.far += obs.lanes[slot].far;
            pc.mid += obs.lanes[slot].mid;
            pc.near += obs.lanes[slot].near;
        }
    }
}

void set_lane_counts(TrafficObservation &obs, const std::string &lane_id, int queued, int far,
                     int mid, int near) {
    for (auto &lane : obs.lanes) {
        if (lane.lane_id != lane_id) continue;
        lane.queued = queued;
        lane.far = far;
        lane.mid = mid;
        lane.near = near;
        recompute_phase_totals(obs);
        return;
    }
    throw ValidationError("observation has no lane " + lane_id);
}

TrafficObservation observe(const Simulation &sim, const Intersection &inter) {
    TrafficObservation obs = observe_topology(sim.network(), inter);
    for (auto &lane : obs.lanes) {
        int li = sim.network().lane_index.at(lane.lane_id);
        for (const auto &view : sim.lane_vehicles(li)) {
            if (view.speed < sim.config().v_stop) {
                lane.queued += 1;
            } else {
                double third = lane.lane_length / 3.0;
                if (view.dist_to_stop < third) lane.near += 1;
                else if (view.dist_to_stop < 2.0 * third) lane.mid += 1;
                else lane.far += 1;
            }
        }
    }
    recompute_phase_totals(obs);
    return obs;
}

// --- JSON ------------------------------------------------------------------

using nlohmann::ordered_json;

std::string observation_to_json(const TrafficObservation &obs) {
    ordered_json j;
    j["intersection_id"] = obs.intersection_id;
    j["shape"] = obs.shape;
    j["incoming_roads"] = obs.incoming_roads;
    j["incoming_lane_counts"] = obs.incoming_lane_counts;
    j["movement_count"] = obs.movement_count;
    j["phase_count"] = obs.phase_count;
    j["phase_movements"] = obs.phase_movements;
    j["lanes"] = ordered_json::array();
    for (const auto &l : obs.lanes) {
        j["lanes"].push_back({{"lane_id", l.lane_id},
                              {"lane_length", l.lane_length},
                              {"queued", l.queued},
                              {"far", l.far},
                              {"mid", l.mid},
                              {"near", l.near}});
    }
    j["phases"] = ordered_json::array();
    for (const auto &p : obs.phases) {
        j["phases"].push_back({{"phase_index", p.phase_index},
                               {"lane_slots", p.lane_slots},
                               {"queued", p.queued},
                               {"far", p.far},
                               {"mid", p.mid},
                               {"near", p.near}});
    }
    return j.dump();
}

TrafficObservation observation_from_json(const std::string &json_text) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text);
    } catch (const nlohmann::json::exception &e) {
        throw ParseError(std::string("invalid observation JSON: ") + e.what());
    }
    try {
        TrafficObservation obs;
        obs.intersection_id = j.at("intersection_id").get<std::string>();
        obs.shape = j.at("shape").get<std::string>();
        obs.incoming_roads = j.at("incoming_roads").get<std::vector<std::string>>();
        obs.incoming_lane_counts = j.at("incoming_lane_counts").get<std::vector<int>>();
        obs.movement_count = j.at("movement_count").get<int>();
        obs.phase_count = j.at("phase_count").get<int>();
        obs.phase_movements = j.at("phase_movements").get<std::vector<std::vector<std::string>>>();
        for (const auto &jl : j.at("lanes")) {
            LaneCounts l;
            l.lane_id = jl.at("lane_id").get<std::string>();
            l.lane_length = jl.at("lane_length").get<double>();
            l.queued = jl.at("queued").get<int>();
            l.far = jl.at("far").get<int>();
            l.mid = jl.at("mid").get<int>();
            l.near = jl.at("near").get<int>();
            obs.lanes.push_back(std::move(l));
        }
        for (const auto &jp : j.at("phases")) {
            PhaseCounts p;
            p.phase_index = jp.at("phase_index").get<int>();
            p.lane_slots = jp.at("lane_slots").get<std::vector<int>>();
            p.queued = jp.at("queued").get<int>();
            p.far = jp.at("far").get<int>();
            p.mid = jp.at("mid").get<int>();
            p.near = jp.at("near").get<int>();
            obs.phases.push_back(std::move(p));
        }
        return obs;
    } catch (const nlohmann::json::exception &e) {
        throw ParseError(std::string("malformed observation document: ") + e.what());
    }
}

// --- prompt rendering --------------------------------------------------------

namespace {

const char *kEmergencyCommonsense =
    "1. EMERGENCY VEHICLE PRIORITY: Emergency vehicles have the highest priority. Phase "
    "selection should PRIMARILY aim to minimize their waiting time and allow them to pass "
    "through the intersection as quickly as possible.\n"
    "2. MAXIMIZE THROUGHPUT: Choose phases that reduce overall traffic delay and congestion "
    "across all lanes.\n"
    "3. EARLY QUEUE URGENCY: Traffic congestion at intersections is mostly caused by vehicles "
    "queued NEAR the stop line. PRIORITIZE lanes with long queues there, while vehicles in "
    "distant segments can wait.\n"
    "4. DOWNSTREAM BLOCKAGE CAUTION: Avoid activating any lane that would push the downstream "
    "link near capacity, as this risks spill back and network-wide delays.\n"
    "5. WAITING TIME FAIRNESS: Lanes that have waited excessively must be served once "
    "downstream allows—they cannot be skipped indefinitely.\n"
    "6. LANE RULES: Vehicles are permitted to pass one at a time per lane. All vehicles, "
    "INCLUDING emergency vehicles, must follow the queuing order, meaning a vehicle cannot "
    "move until those ahead of it have departed.\n";

const char *kRegularCommonsense =
    "1. MAXIMIZE THROUGHPUT: Choose phases that reduce overall traffic delay and congestion "
    "across all lanes.\n"
    "2. EARLY QUEUE URGENCY: Traffic congestion at intersections is mostly caused by vehicles "
    "queued NEAR the stop line. PRIORITIZE lanes with long queues there, while vehicles in "
    "distant segments can wait.\n"
    "3. DOWNSTREAM BLOCKAGE CAUTION: Avoid activating any lane that would push the downstream "
    "link near capacity, as this risks spill back and network-wide delays.\n"
    "4. WAITING TIME FAIRNESS: Lanes that have waited excessively must be served once "
    "downstream allows—they cannot be skipped indefinitely.\n"
    "5. LANE RULES: Vehicles are permitted to pass one at a time per lane. All vehicles must "
    "follow the queuing order, meaning a vehicle cannot move until those ahead of it have "
    "departed.\n";

void render_representation(std::ostringstream &out, const TrafficObservation &obs) {
    out << "Intersection Shape: " << obs.shape << "\n";
    out << "Intersection Topology: There are " << obs.incoming_roads.size()
        << " bidirectional roads connected to this intersection (ID: ";
    for (size_t i = 0; i < obs.incoming_roads.size(); ++i) {
        if (i > 0) out << ", ";
        out << obs.incoming_roads[i];
    }
    out << "), with ";
    for (size_t i = 0; i < obs.incoming_lane_counts.size(); ++i) {
        if (i > 0) out << ", ";
        out << obs.incoming_lane_counts[i];
    }
    out << " incoming lanes respectively. A total of " << obs.movement_count
        << " traffic movements are managed by " << obs.phase_count
        << " signal phases in this intersection.\n";

    out << "Action Space (Traffic movements allowed by each phase, upstream lane → "
           "downstream lane):\n";
    for (size_t p = 0; p < obs.phase_movements.size(); ++p) {
        out << "Phase " << (p + 1) << ": ";
        for (size_t m = 0; m < obs.phase_movements[p].size(); ++m) {
            if (m > 0) out << "; ";
            out << obs.phase_movements[p][m];
        }
        out << "\n";
    }

    out << "Queuing and Approaching Vehicles:\n";
    out << "The number of queuing vehicles (QV) is counted on upstream lanes controlled by "
           "each signal phase. Each lane is divided into three equal-length segments from the "
           "lane start to the stop line, representing the far, middle, and near sections to "
           "the stop line. The count of approaching vehicles (AV) in each segment is recorded "
           "accordingly as far/mid/near.\n";
    for (const auto &phase : obs.phases) {
        out << "Phase " << phase.phase_index << ":\n";
        for (int slot : phase.lane_slots) {
            const LaneCounts &l = obs.lanes[slot];
            out << l.lane_id << ": QV=" << l.queued << "; AV=" << l.far << "/" << l.mid << "/"
                << l.near << "\n";
        }
        out << "Total: QV=" << phase.queued << "; AV=" << phase.far << "/" << phase.mid << "/"
            << phase.near << "\n";
    }
}

void render_output_format(std::ostringstream &out, bool with_analysis) {
    out << "[Output Format]\n";
    out << "Your response must strictly follow the format below.\n";
    out << "<response>\n";
    if (with_analysis) out << "<traffic analysis>INSERT_ANALYSIS_HERE</traffic analysis>\n";
    out << "<evaluation and explanation>INSERT_EVALUATION_AND_EXPLANATION_HERE"
           "</evaluation and explanation>\n";
    out << "<signal>INSERT_PHASE_NUMBER_HERE</signal>\n";
    out << "</response>\n";
}

std::string planned_route_roads(const std::vector<std::string> &planned_route) {
    std::string out;
    std::string last;
    for (const auto &lane_id : planned_route) {
        std::string road = road_of_lane(lane_id);
        if (road == last) continue;
        if (!out.empty()) out += "→ ";
        out += road;
        last = road;
    }
    return out;
}

} // namespace

PromptBundle render_regular_prompt(const TrafficObservation &obs) {
    std::ostringstream out;
    out << "[Role]\nYou are a traffic signal control agent.\n\n";
    out << "[Objective]\n"
           "Based on the real-time traffic representation and commonsense knowledge, determine "
           "the most effective next traffic signal phase that improves the overall traffic "
           "condition.\n\n";
    out << "[Real-Time Traffic Representation]\n";
    render_representation(out, obs);
    out << "\n[Commonsense Knowledge]\n" << kRegularCommonsense;
    out << "\n[Task Description]\n"
           "Carefully analyze the given information and make a well-reasoned decision. Select "
           "an appropriate traffic signal phase that reduces overall traffic delay and "
           "congestion. Provide the phase selection and an explanation.\n\n";
    render_output_format(out, false);

    PromptBundle bundle;
    bundle.text = out.str();
    bundle.mode = PromptMode::Regular;
    bundle.sections = {"role", "objective", "representation", "commonsense", "task",
                       "output format"};
    return bundle;
}

PromptBundle render_emergency_prompt(const TrafficObservation &obs,
                                     const EmergencyVehicleState &ev,
                                     const std::vector<GuidanceItem> &guidance) {
    std::ostringstream out;
    out << "[Role]\nYou are a traffic signal control agent with emergency response.\n\n";
    out << "[Objective]\n"
           "Based on the real-time traffic representation, emergency vehicle state, critical "
           "guidance for emergency scenarios and commonsense knowledge, determine the most "
           "effective next traffic signal phase that allows emergency vehicles to pass through "
           "as quickly as possible and improve the overall traffic condition.\n\n";
    out << "[Real-Time Traffic Representation and Emergency Vehicle State]\n";
    render_representation(out, obs);
    out << "Emergency Vehicle State:\n";
    out << "Emergency Vehicle ID: " << ev.name << "\n";
    out << "Planned Route: " << planned_route_roads(ev.planned_route) << "\n";
    out << "Current Position: " << ev.current_lane << ", "
        << format_fixed(ev.distance_to_stop_line, 1) << "m to stop line\n";
    out << "Speed: " << format_fixed(ev.speed, 1) << "m/s\n";

    out << "\n[Critical Guidance for Emergency Scenarios]\n";
    if (guidance.empty()) {
        out << "No guidance retrieved.\n";
    } else {
        for (size_t g = 0; g < guidance.size(); ++g) {
            if (g > 0) out << "\n";
            out << "Current Possible Situation: " << guidance[g].situation << "\n";
            out << "Recommended Action: " << guidance[g].recommended_action << "\n";
            out << "Intended Effect: " << guidance[g].intended_effect << "\n";
        }
    }

    out << "\n[Commonsense Knowledge]\n" << kEmergencyCommonsense;
    out << "\n[Task Description]\n"
           "Carefully analyze the given information, think step by step, and make "
           "well-reasoned decisions.\n"
           "1. Analysis: Interpret and analyze the current traffic conditions and the "
           "emergency vehicle state.\n"
           "2. Prediction and Evaluation: Evaluate and compare traffic signal phases by "
           "predicting emergency vehicle arrival time at the intersection and future queue "
           "lengths. Integrate critical guidance and commonsense knowledge to ensure the "
           "emergency vehicle can pass through intersections without delay.\n"
           "3. Decision-Making: Select an appropriate traffic signal phase that enables "
           "emergency vehicles to pass through the intersection as quickly as possible and "
           "reduces overall traffic congestion. Provide the appropriate phase selection and "
           "an explanation.\n\n";
    render_output_format(out, true);

    PromptBundle bundle;
    bundle.text = out.str();
    bundle.mode = PromptMode::Emergency;
    bundle.sections = {"role",      "objective",   "representation", "emergency state",
                       "guidance",  "commonsense", "task",           "output format"};
    return bundle;
}

} // namespace regtsc
