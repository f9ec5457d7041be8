#include "regtsc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include <json.hpp>

#include "regtsc/errors.hpp"
#include "regtsc/util.hpp"

namespace regtsc {

namespace {
constexpr uint64_t kArrivalStream = 0xA11A;
constexpr uint64_t kEmergencyStream = 0xE3E3;

int64_t movement_key(int from_lane, int to_lane) {
    return (static_cast<int64_t>(from_lane) << 32) | static_cast<uint32_t>(to_lane);
}
} // namespace

void SimulationConfig::validate() const {
    if (horizon_steps <= 0) throw ValidationError("T must be > 0");
    if (step_length <= 0.0) throw ValidationError("step_length must be > 0");
    if (decision_interval < 1) throw ValidationError("decision_interval must be >= 1");
    if (emergency_count < 0) throw ValidationError("M must be >= 0");
    if (arrival_rate < 0.0) throw ValidationError("arrival_rate must be >= 0");
    if (saturation_headway <= 0.0) throw ValidationError("saturation_headway must be > 0");
    if (free_flow_speed <= 0.0) throw ValidationError("free_flow_speed must be > 0");
    if (queue_gap <= 0.0) throw ValidationError("queue_gap must be > 0");
}

// --- routing ---------------------------------------------------------------

RouteTable::RouteTable(const RoadNetwork &net) {
    const int lane_count = (int)net.lanes.size();
    std::vector<std::vector<std::pair<int, double>>> adjacency(lane_count);
    for (const auto &inter : net.intersections) {
        for (const auto &m : inter.movements) {
            int from = net.lane_index.at(m.from_lane);
            int to = net.lane_index.at(m.to_lane);
            adjacency[from].push_back({to, net.lanes[to].length});
        }
    }
    for (auto &edges : adjacency) std::sort(edges.begin(), edges.end());

    std::vector<int> boundary_nodes;
    for (const auto &id : net.boundary_nodes) boundary_nodes.push_back(net.node_index.at(id));

    // Entry lanes per boundary node; exit lanes keyed by end node.
    std::vector<std::vector<int>> entry_lanes(boundary_nodes.size());
    std::unordered_map<int, std::vector<int>> exits_by_node;
    for (int li = 0; li < lane_count; ++li) {
        const Road &r = net.roads[net.road_index.at(net.lanes[li].road)];
        for (size_t b = 0; b < boundary_nodes.size(); ++b) {
            if (net.node_index.at(r.from) == boundary_nodes[b]) entry_lanes[b].push_back(li);
        }
        exits_by_node[net.node_index.at(r.to)].push_back(li);
    }

    const double inf = std::numeric_limits<double>::infinity();
    for (size_t bs = 0; bs < boundary_nodes.size(); ++bs) {
        if (entry_lanes[bs].empty()) continue;
        std::vector<double> dist(lane_count, inf);
        std::vector<int> pred(lane_count, -1);
        using Item = std::pair<double, int>;
        std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
        for (int li : entry_lanes[bs]) {
            dist[li] = net.lanes[li].length;
            pq.push({dist[li], li});
        }
        while (!pq.empty()) {
            auto [d, u] = pq.top();
            pq.pop();
            if (d > dist[u]) continue;
            for (auto [v, w] : adjacency[u]) {
                if (d + w < dist[v]) {
                    dist[v] = d + w;
                    pred[v] = u;
                    pq.push({dist[v], v});
                }
            }
        }
        for (size_t bt = 0; bt < boundary_nodes.size(); ++bt) {
            if (bt == bs) continue;
            auto it = exits_by_node.find(boundary_nodes[bt]);
            if (it == exits_by_node.end()) continue;
            int best = -1;
            for (int li : it->second) {
                if (dist[li] == inf) continue;
                if (best == -1 || dist[li] < dist[best] || (dist[li] == dist[best] && li < best))
                    best = li;
            }
            if (best == -1) continue;
            std::vector<int> path;
            for (int cur = best; cur != -1; cur = pred[cur]) path.push_back(cur);
            std::reverse(path.begin(), path.end());
            pairs_.push_back({(int)bs, (int)bt});
            paths_.push_back(std::move(path));
        }
    }
}

namespace {

std::vector<int> sample_route(const RouteTable &routes, std::mt19937_64 &rng) {
    std::uniform_int_distribution<size_t> pick(0, routes.connected_pairs().size() - 1);
    return routes.path_for_pair((int)pick(rng));
}

void require_routable(const RoadNetwork &net, const RouteTable &routes) {
    if (net.boundary_nodes.size() < 2)
        throw NoRouteError("network needs at least 2 boundary nodes");
    if (routes.connected_pairs().empty())
        throw NoRouteError("no route exists between any pair of boundary nodes");
}

} // namespace

std::vector<Vehicle> spawn_arrivals(const RoadNetwork &net, const RouteTable &routes,
                                    const SimulationConfig &config, int step) {
    std::vector<Vehicle> out;
    double mean = config.arrival_rate * config.step_length / 60.0;
    if (mean <= 0.0) return out;
    require_routable(net, routes);
    auto rng = make_rng(config.seed, kArrivalStream, (uint64_t)step);
    std::poisson_distribution<int> arrivals(mean);
    int n = arrivals(rng);
    out.reserve(n);
    for (int k = 0; k < n; ++k) {
        Vehicle v;
        v.vclass = VehicleClass::Regular;
        v.route = sample_route(routes, rng);
        v.spawn_step = step;
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<EmergencyEvent> schedule_emergencies(const RoadNetwork &net, const RouteTable &routes,
                                                 const SimulationConfig &config) {
    std::vector<EmergencyEvent> out;
    if (config.emergency_count == 0) return out;
    require_routable(net, routes);
    auto rng = make_rng(config.seed, kEmergencyStream);
    std::uniform_int_distribution<int> when(0, config.horizon_steps / 2);
    for (int m = 0; m < config.emergency_count; ++m) {
        EmergencyEvent ev;
        ev.spawn_step = when(rng);
        ev.route = sample_route(routes, rng);
        out.push_back(std::move(ev));
    }
    return out;
}

// --- simulation ------------------------------------------------------------

Simulation::Simulation(const RoadNetwork &net, const SimulationConfig &config)
    : net_(&net), config_(config), routes_(net) {
    config_.validate();

    lanes_.resize(net.lanes.size());
    for (size_t li = 0; li < net.lanes.size(); ++li) {
        const Lane &l = net.lanes[li];
        lanes_[li].length = l.length;
        const Road &r = net.roads[net.road_index.at(l.road)];
        auto it = net.intersection_index.find(r.to);
        lanes_[li].head_intersection = it == net.intersection_index.end() ? -1 : it->second;
    }

    upstream_of_.resize(net.intersections.size());
    movement_lookup_.resize(net.intersections.size());
    phase_serves_.resize(net.intersections.size());
    for (size_t ii = 0; ii < net.intersections.size(); ++ii) {
        const Intersection &inter = net.intersections[ii];
        for (const auto &lane_id : inter.upstream_lanes)
            upstream_of_[ii].push_back(net.lane_index.at(lane_id));
        for (size_t mi = 0; mi < inter.movements.size(); ++mi) {
            const auto &m = inter.movements[mi];
            movement_lookup_[ii][movement_key(net.lane_index.at(m.from_lane),
                                              net.lane_index.at(m.to_lane))] = (int)mi;
        }
        phase_serves_[ii].resize(inter.phases.size());
        for (size_t p = 0; p < inter.phases.size(); ++p) {
            phase_serves_[ii][p].assign(inter.movements.size(), 0);
            for (int mi : inter.phases[p].movements) phase_serves_[ii][p][mi] = 1;
        }
    }

    emergency_events_ = schedule_emergencies(net, routes_, config_);
    emergency_vehicle_ids_.assign(emergency_events_.size(), -1);
    wte_accum_.assign(net.intersections.size(), 0.0);
    aql_samples_.resize(net.intersections.size());
}

void Simulation::enter_lane(int vehicle_id, int lane_index) {
    Vehicle &v = vehicles_[vehicle_id];
    v.dist_to_stop = lanes_[lane_index].length;
    v.speed = config_.free_flow_speed;
    v.queued = false;
    lanes_[lane_index].movers.push_back(vehicle_id);
}

void Simulation::spawn_vehicle(Vehicle v) {
    v.id = (int)vehicles_.size();
    vehicles_.push_back(std::move(v));
    ++spawned_total_;
    enter_lane(vehicles_.back().id, vehicles_.back().current_lane());
}

int Simulation::add_vehicle(const std::vector<std::string> &lane_ids, VehicleClass vclass) {
    if (lane_ids.empty()) throw ValidationError("vehicle route is empty");
    Vehicle v;
    v.vclass = vclass;
    for (const auto &id : lane_ids) {
        auto it = net_->lane_index.find(id);
        if (it == net_->lane_index.end()) throw ValidationError("route lane not found: " + id);
        v.route.push_back(it->second);
    }
    v.spawn_step = step_;
    int id = (int)vehicles_.size();
    if (vclass == VehicleClass::Emergency) emergency_vehicle_ids_.push_back(id);
    spawn_vehicle(std::move(v));
    return id;
}

bool Simulation::movement_served(int inter_idx, int phase_1based, int from_lane,
                                 int to_lane) const {
    auto it = movement_lookup_[inter_idx].find(movement_key(from_lane, to_lane));
    if (it == movement_lookup_[inter_idx].end()) return false;
    return phase_serves_[inter_idx][phase_1based - 1][it->second] != 0;
}

void Simulation::refresh_queue_positions() {
    for (auto &lane : lanes_) {
        int slot = 0;
        for (int vid : lane.queue) {
            vehicles_[vid].dist_to_stop = std::min(slot * config_.queue_gap, lane.length);
            ++slot;
        }
    }
}

StepOutcome Simulation::step(const std::vector<int> &active_phase_per_intersection) {
    if (finished()) throw ValidationError("simulation horizon already reached");
    if (active_phase_per_intersection.size() != net_->intersections.size())
        throw InvalidPhaseError("phase vector size does not match intersection count");
    for (size_t i = 0; i < net_->intersections.size(); ++i) {
        int p = active_phase_per_intersection[i];
        int j = net_->intersections[i].phase_count();
        if (p < 1 || p > j)
            throw InvalidPhaseError("phase " + std::to_string(p) + " out of range [1, " +
                                    std::to_string(j) + "] at " + net_->intersections[i].id);
    }

    const double dt = config_.step_length;

    // 1. Arrivals and scheduled emergencies.
    for (Vehicle &v : spawn_arrivals(*net_, routes_, config_, step_)) {
        spawn_vehicle(std::move(v));
    }
    for (size_t m = 0; m < emergency_events_.size(); ++m) {
        if (emergency_events_[m].spawn_step != step_) continue;
        Vehicle v;
        v.vclass = VehicleClass::Emergency;
        v.route = emergency_events_[m].route;
        v.spawn_step = step_;
        emergency_vehicle_ids_[m] = (int)vehicles_.size();
        spawn_vehicle(std::move(v));
    }

    // 2. Phase-gated FIFO discharge.
    std::vector<int> discharged(net_->intersections.size(), 0);
    for (size_t ii = 0; ii < net_->intersections.size(); ++ii) {
        int phase = active_phase_per_intersection[ii];
        for (int li : upstream_of_[ii]) {
            LaneRt &lane = lanes_[li];
            if (lane.queue.empty()) {
                lane.service_credit = 0.0;
                continue;
            }
            auto head_served = [&]() {
                const Vehicle &head = vehicles_[lane.queue.front()];
                return !head.last_lane() &&
                       movement_served((int)ii, phase, li, head.route[head.route_pos + 1]);
            };
            if (!head_served()) {
                lane.service_credit = 0.0;
                continue;
            }
            lane.service_credit += dt / config_.saturation_headway;
            while (lane.service_credit >= 1.0 && !lane.queue.empty() && head_served()) {
                int vid = lane.queue.front();
                lane.queue.pop_front();
                lane.service_credit -= 1.0;
                Vehicle &v = vehicles_[vid];
                v.route_pos += 1;
                enter_lane(vid, v.current_lane());
                ++discharged[ii];
            }
        }
    }

    // 3. Free-flow advance, queue joins, completions.
    for (size_t li = 0; li < lanes_.size(); ++li) {
        LaneRt &lane = lanes_[li];
        if (lane.movers.empty()) continue;
        double extent = lane.queue.size() * config_.queue_gap;
        std::vector<int> keep;
        keep.reserve(lane.movers.size());
        for (int vid : lane.movers) {
            Vehicle &v = vehicles_[vid];
            v.dist_to_stop -= v.speed * dt;
            if (v.last_lane()) {
                if (v.dist_to_stop <= 0.0) {
                    v.finish_step = step_ + 1;
                    v.speed = 0.0;
                    v.dist_to_stop = 0.0;
                    ++completed_total_;
                } else {
                    keep.push_back(vid);
                }
            } else if (v.dist_to_stop <= extent) {
                v.queued = true;
                v.speed = 0.0;
                v.dist_to_stop = std::min(extent, lane.length);
                lane.queue.push_back(vid);
                extent += config_.queue_gap;
            } else {
                keep.push_back(vid);
            }
        }
        lane.movers = std::move(keep);
    }

    // 4. Waiting accrual; emergency waiting attributed to the lane's head
    //    intersection.
    for (Vehicle &v : vehicles_) {
        if (v.finish_step) continue;
        if (v.speed < config_.v_stop) {
            v.waiting_s += dt;
            if (v.vclass == VehicleClass::Emergency) {
                int hi = lanes_[v.current_lane()].head_intersection;
                if (hi >= 0) wte_accum_[hi] += dt;
            }
        }
    }

    refresh_queue_positions();

    // 5. Outcome; WTE accumulators reset at decision-interval boundaries.
    StepOutcome out;
    out.step = step_ + 1;
    out.per_intersection.resize(net_->intersections.size());
    for (size_t ii = 0; ii < net_->intersections.size(); ++ii) {
        int ql = 0;
        for (int li : upstream_of_[ii]) ql += (int)lanes_[li].queue.size();
        out.per_intersection[ii].queue_length = ql;
        out.per_intersection[ii].wte_interval_s = wte_accum_[ii];
        out.per_intersection[ii].discharged = discharged[ii];
    }
    out.spawned_total = spawned_total_;
    out.completed_vehicles = completed_total_;
    out.active_vehicles = spawned_total_ - completed_total_;

    ++step_;
    if (step_ % config_.decision_interval == 0 || step_ == config_.horizon_steps) {
        for (size_t ii = 0; ii < net_->intersections.size(); ++ii) {
            aql_samples_[ii].push_back(out.per_intersection[ii].queue_length);
            wte_accum_[ii] = 0.0;
        }
    }
    return out;
}

std::vector<int> Simulation::queue_lengths() const {
    std::vector<int> out(net_->intersections.size(), 0);
    for (size_t ii = 0; ii < net_->intersections.size(); ++ii) {
        for (int li : upstream_of_[ii]) out[ii] += (int)lanes_[li].queue.size();
    }
    return out;
}

std::vector<EmergencyVehicleState> Simulation::active_emergencies() const {
    std::vector<EmergencyVehicleState> out;
    for (size_t m = 0; m < emergency_vehicle_ids_.size(); ++m) {
        int vid = emergency_vehicle_ids_[m];
        if (vid < 0) continue;
        const Vehicle &v = vehicles_[vid];
        if (v.finish_step) continue;
        EmergencyVehicleState st;
        st.vehicle_id = vid;
        st.name = "Ambulance_" + std::to_string(m + 1);
        st.planned_route.reserve(v.route.size());
        for (int li : v.route) st.planned_route.push_back(net_->lanes[li].id);
        st.route_pos = v.route_pos;
        st.current_lane = net_->lanes[v.current_lane()].id;
        st.distance_to_stop_line = v.dist_to_stop;
        st.speed = v.speed;
        out.push_back(std::move(st));
    }
    return out;
}

std::vector<Simulation::VehicleView> Simulation::lane_vehicles(int lane_index) const {
    std::vector<VehicleView> out;
    const LaneRt &lane = lanes_[lane_index];
    for (int vid : lane.queue) {
        const Vehicle &v = vehicles_[vid];
        out.push_back({v.dist_to_stop, v.speed, v.vclass == VehicleClass::Emergency});
    }
    for (int vid : lane.movers) {
        const Vehicle &v = vehicles_[vid];
        out.push_back({v.dist_to_stop, v.speed, v.vclass == VehicleClass::Emergency});
    }
    return out;
}

MetricsReport Simulation::metrics() const {
    if (!finished()) throw ValidationError("metrics requested before the horizon");
    MetricsReport m;
    const double dt = config_.step_length;
    m.vehicles_total = spawned_total_;
    m.vehicles_completed = completed_total_;

    double travel_sum = 0.0, wait_sum = 0.0;
    double e_travel_sum = 0.0, e_wait_sum = 0.0;
    for (const Vehicle &v : vehicles_) {
        int end = v.finish_step ? *v.finish_step : config_.horizon_steps;
        travel_sum += (end - v.spawn_step) * dt;
        wait_sum += v.waiting_s;
    }
    if (spawned_total_ > 0) {
        m.att = travel_sum / spawned_total_;
        m.awt = wait_sum / spawned_total_;
    }

    long aql_count = 0;
    long aql_sum = 0;
    for (const auto &trace : aql_samples_) {
        for (int q : trace) {
            aql_sum += q;
            ++aql_count;
        }
    }
    m.aql = aql_count > 0 ? (double)aql_sum / (double)aql_count : 0.0;

    int emergencies = 0;
    for (int vid : emergency_vehicle_ids_) {
        if (vid < 0) continue;
        const Vehicle &v = vehicles_[vid];
        int end = v.finish_step ? *v.finish_step : config_.horizon_steps;
        double travel = (end - v.spawn_step) * dt;
        m.emergency_travel_times.push_back(travel);
        e_travel_sum += travel;
        e_wait_sum += v.waiting_s;
        ++emergencies;
    }
    m.emergencies_total = emergencies;
    if (emergencies > 0) {
        m.atte = e_travel_sum / emergencies;
        m.awte = e_wait_sum / emergencies;
    }
    return m;
}

std::string metrics_to_json(const MetricsReport &m) {
    nlohmann::ordered_json j;
    j["att"] = m.att;
    j["awt"] = m.awt;
    j["aql"] = m.aql;
    if (m.atte) j["atte"] = *m.atte;
    else j["atte"] = nullptr;
    if (m.awte) j["awte"] = *m.awte;
    else j["awte"] = nullptr;
    j["emergency_travel_times"] = m.emergency_travel_times;
    j["vehicles_total"] = m.vehicles_total;
    j["vehicles_completed"] = m.vehicles_completed;
    j["emergencies_total"] = m.emergencies_total;
    return j.dump(2) + "\n";
}

} // namespace regtsc
