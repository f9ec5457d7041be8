#pragma once

// Shared fixtures: the worked cross-intersection example (queue table,
// ambulance on road#2_1) used by the prompt goldens and agent tests.

#include <fstream>
#include <sstream>
#include <string>

#include "regtsc/network.hpp"
#include "regtsc/observation.hpp"
#include "regtsc/rerag_types.hpp"
#include "regtsc/sim.hpp"

namespace fixtures {

inline regtsc::TrafficObservation cross_observation() {
    static const regtsc::RoadNetwork net = regtsc::make_cross();
    regtsc::TrafficObservation obs =
        regtsc::observe_topology(net, net.intersections.at(0));
    regtsc::set_lane_counts(obs, "road#1_2", 4, 0, 3, 0);
    regtsc::set_lane_counts(obs, "road#3_2", 1, 3, 0, 2);
    regtsc::set_lane_counts(obs, "road#1_1", 2, 1, 1, 0);
    regtsc::set_lane_counts(obs, "road#3_1", 1, 2, 0, 1);
    regtsc::set_lane_counts(obs, "road#2_2", 3, 1, 0, 2);
    regtsc::set_lane_counts(obs, "road#4_2", 2, 1, 1, 3);
    regtsc::set_lane_counts(obs, "road#2_1", 5, 2, 1, 1);
    regtsc::set_lane_counts(obs, "road#4_1", 2, 1, 2, 0);
    return obs;
}

inline regtsc::EmergencyVehicleState cross_ambulance() {
    regtsc::EmergencyVehicleState ev;
    ev.vehicle_id = 42;
    ev.name = "Ambulance_1";
    ev.planned_route = {"road#72_1", "road#64_1", "road#2_1",
                        "road#4_1",  "road#9_1",  "road#32_1"};
    ev.route_pos = 2;
    ev.current_lane = "road#2_1";
    ev.distance_to_stop_line = 276.8;
    ev.speed = 17.4;
    return ev;
}

inline std::vector<regtsc::GuidanceItem> cross_guidance() {
    regtsc::GuidanceItem item;
    item.id = "g001";
    item.situation = "An emergency vehicle is approaching the intersection, but its lane is "
                     "still occupied by queuing vehicles.";
    item.recommended_action =
        "Promptly select the signal phase for the lane with the emergency vehicle.";
    item.intended_effect = "Clear the queuing vehicles in the lane with the emergency vehicle "
                           "for it rapid passage.";
    return {item};
}

inline std::string fixture_path(const std::string &name) {
    return std::string(REGTSC_FIXTURE_DIR) + "/" + name;
}

inline std::string read_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Golden comparison with an opt-in refresh: set REGTSC_UPDATE_GOLDENS=1 to
// rewrite the file instead of checking.
inline bool matches_golden(const std::string &rendered, const std::string &name) {
    std::string path = fixture_path(name);
    if (std::getenv("REGTSC_UPDATE_GOLDENS")) {
        std::ofstream out(path, std::ios::binary);
        out << rendered;
        return true;
    }
    return rendered == read_file(path);
}

} // namespace fixtures
