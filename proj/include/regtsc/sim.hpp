#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "regtsc/network.hpp"

namespace regtsc {

struct SimulationConfig {
    int horizon_steps = 1800;       // T
    double step_length = 1.0;       // seconds
    int decision_interval = 5;      // steps between phase decisions (1 = per-step)
    int emergency_count = 6;        // M
    double arrival_rate = 57.14;    // vehicles per minute, network-wide
    uint64_t seed = 1;
    double v_stop = 0.1;            // m/s, below this a vehicle counts as queued
    double saturation_headway = 2.0;// seconds per discharged vehicle per lane
    double free_flow_speed = 13.9;  // m/s
    double queue_gap = 7.0;         // meters of lane taken by one queued vehicle

    void validate() const; // throws ValidationError
};

enum class VehicleClass { Regular, Emergency };

struct Vehicle {
    int id = -1;
    VehicleClass vclass = VehicleClass::Regular;
    std::vector<int> route;     // lane indices into RoadNetwork::lanes
    int route_pos = 0;
    int spawn_step = 0;
    double dist_to_stop = 0.0;  // meters to the current lane's stop line
    double speed = 0.0;
    double waiting_s = 0.0;
    std::optional<int> finish_step;
    bool queued = false;

    int current_lane() const { return route[route_pos]; }
    bool last_lane() const { return route_pos + 1 >= static_cast<int>(route.size()); }
};

struct EmergencyVehicleState {
    int vehicle_id = -1;
    std::string name;                        // e.g. "Ambulance_1"
    std::vector<std::string> planned_route;  // full route, lane ids
    int route_pos = 0;                       // index of the current lane in planned_route
    std::string current_lane;
    double distance_to_stop_line = 0.0;
    double speed = 0.0;
};

struct IntersectionStepStats {
    int queue_length = 0;       // queued vehicles on upstream lanes, end of step
    double wte_interval_s = 0.0;// emergency waiting accumulated over the running interval
    int discharged = 0;
};

struct StepOutcome {
    int step = 0; // number of completed steps after this one
    std::vector<IntersectionStepStats> per_intersection;
    int spawned_total = 0;
    int active_vehicles = 0;
    int completed_vehicles = 0;
};

struct MetricsReport {
    double att = 0.0; // seconds, censored at horizon for unfinished vehicles
    double awt = 0.0;
    double aql = 0.0; // mean queue over intersections x decision points
    std::optional<double> atte;
    std::optional<double> awte;
    std::vector<double> emergency_travel_times; // seconds, per EV in spawn order
    int vehicles_total = 0;
    int vehicles_completed = 0;
    int emergencies_total = 0;
};

std::string metrics_to_json(const MetricsReport &m);

// Lane-level shortest paths between boundary nodes; edges are declared
// traffic movements, so every generated route is signal-feasible.
class RouteTable {
public:
    explicit RouteTable(const RoadNetwork &net);

    // Ordered (entry node index, exit node index) pairs with a path.
    const std::vector<std::pair<int, int>> &connected_pairs() const { return pairs_; }
    const std::vector<int> &path_for_pair(int pair_index) const { return paths_[pair_index]; }

private:
    std::vector<std::pair<int, int>> pairs_;
    std::vector<std::vector<int>> paths_;
};

struct EmergencyEvent {
    int spawn_step = 0;
    std::vector<int> route; // lane indices
};

// Poisson arrivals for one step; deterministic given (config.seed, step).
std::vector<Vehicle> spawn_arrivals(const RoadNetwork &net, const RouteTable &routes,
                                    const SimulationConfig &config, int step);

// Exactly M events with spawn steps uniform on [0, T/2]; deterministic given seed.
std::vector<EmergencyEvent> schedule_emergencies(const RoadNetwork &net, const RouteTable &routes,
                                                 const SimulationConfig &config);

class Simulation {
public:
    Simulation(const RoadNetwork &net, const SimulationConfig &config);

    // Advances one step under the given phases (1-based index per
    // intersection, aligned with network().intersections order).
    StepOutcome step(const std::vector<int> &active_phase_per_intersection);

    int current_step() const { return step_; }
    bool finished() const { return step_ >= config_.horizon_steps; }

    MetricsReport metrics() const;

    const RoadNetwork &network() const { return *net_; }
    const SimulationConfig &config() const { return config_; }
    const std::vector<Vehicle> &vehicles() const { return vehicles_; }

    std::vector<EmergencyVehicleState> active_emergencies() const;
    std::vector<int> queue_lengths() const; // per intersection, current snapshot

    struct VehicleView {
        double dist_to_stop;
        double speed;
        bool emergency;
    };
    std::vector<VehicleView> lane_vehicles(int lane_index) const;

    int spawned_total() const { return spawned_total_; }
    int completed_total() const { return completed_total_; }
    int active_total() const { return spawned_total_ - completed_total_; }

    // Places one vehicle at the start of the given lane route. Used by tests
    // and scripted scenarios; does not touch the seeded arrival streams.
    int add_vehicle(const std::vector<std::string> &lane_ids,
                    VehicleClass vclass = VehicleClass::Regular);

private:
    struct LaneRt {
        std::vector<int> movers; // vehicle ids, closest to stop line first
        std::deque<int> queue;   // FIFO, front discharges first
        double service_credit = 0.0;
        int head_intersection = -1; // -1 when the road ends at a boundary node
        double length = 0.0;
    };

    void spawn_vehicle(Vehicle v);
    void enter_lane(int vehicle_id, int lane_index);
    bool movement_served(int inter_idx, int phase_1based, int from_lane, int to_lane) const;
    void refresh_queue_positions();

    const RoadNetwork *net_;
    SimulationConfig config_;
    RouteTable routes_;
    std::vector<EmergencyEvent> emergency_events_;
    std::vector<int> emergency_vehicle_ids_; // in event order, -1 until spawned

    std::vector<LaneRt> lanes_;
    std::vector<Vehicle> vehicles_;
    std::vector<std::vector<int>> upstream_of_; // intersection -> lane indices
    // (intersection, from lane, to lane) -> movement index, looked up during discharge
    std::vector<std::unordered_map<int64_t, int>> movement_lookup_;
    std::vector<std::vector<std::vector<char>>> phase_serves_; // [inter][phase][movement]

    int step_ = 0;
    int spawned_total_ = 0;
    int completed_total_ = 0;
    std::vector<double> wte_accum_;       // per intersection, reset at interval boundaries
    std::vector<std::vector<int>> aql_samples_; // per intersection, one per decision point
};

} // namespace regtsc
