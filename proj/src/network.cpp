#include "regtsc/network.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "regtsc/util.hpp"

namespace regtsc {

using nlohmann::ordered_json;

const char *shape_name(IntersectionShape shape) {
    switch (shape) {
    case IntersectionShape::Cross: return "Cross";
    case IntersectionShape::Tee: return "Tee";
    case IntersectionShape::Wye: return "Wye";
    case IntersectionShape::Roundabout: return "Roundabout";
    }
    return "Cross";
}

IntersectionShape shape_from_name(const std::string &name) {
    if (name == "Cross") return IntersectionShape::Cross;
    if (name == "Tee") return IntersectionShape::Tee;
    if (name == "Wye") return IntersectionShape::Wye;
    if (name == "Roundabout") return IntersectionShape::Roundabout;
    throw ParseError("unknown intersection shape: " + name);
}

const char *turn_name(TurnType turn) {
    switch (turn) {
    case TurnType::Through: return "Through";
    case TurnType::Left: return "Left";
    case TurnType::Right: return "Right";
    case TurnType::UTurn: return "UTurn";
    }
    return "Through";
}

TurnType turn_from_name(const std::string &name) {
    if (name == "Through") return TurnType::Through;
    if (name == "Left") return TurnType::Left;
    if (name == "Right") return TurnType::Right;
    if (name == "UTurn") return TurnType::UTurn;
    throw ParseError("unknown turn type: " + name);
}

const Lane &RoadNetwork::lane(const std::string &id) const {
    auto it = lane_index.find(id);
    if (it == lane_index.end()) throw ValidationError("unknown lane: " + id);
    return lanes[it->second];
}

const Road &RoadNetwork::road(const std::string &id) const {
    auto it = road_index.find(id);
    if (it == road_index.end()) throw ValidationError("unknown road: " + id);
    return roads[it->second];
}

const Intersection *RoadNetwork::intersection(const std::string &id) const {
    auto it = intersection_index.find(id);
    return it == intersection_index.end() ? nullptr : &intersections[it->second];
}

const Intersection *RoadNetwork::head_intersection(const std::string &lane_id) const {
    const Lane &l = lane(lane_id);
    const Road &r = road(l.road);
    return intersection(r.to);
}

std::vector<std::string> RoadNetwork::type_signatures() const {
    std::set<std::string> sigs;
    for (const auto &inter : intersections) sigs.insert(inter.type_signature);
    return {sigs.begin(), sigs.end()};
}

std::string intersection_type_id(const RoadNetwork &net, const Intersection &inter) {
    std::map<std::string, int> lanes_per_road;
    for (const auto &lane_id : inter.upstream_lanes) {
        lanes_per_road[net.lane(lane_id).road] += 1;
    }
    std::vector<int> counts;
    counts.reserve(lanes_per_road.size());
    for (const auto &[road_id, n] : lanes_per_road) counts.push_back(n);
    std::sort(counts.begin(), counts.end());

    std::ostringstream out;
    out << shape_name(inter.shape) << '[';
    for (size_t i = 0; i < counts.size(); ++i) {
        if (i > 0) out << ',';
        out << counts[i];
    }
    out << "]J" << inter.phases.size();
    return out.str();
}

void validate_network(RoadNetwork &net) {
    net.node_index.clear();
    net.road_index.clear();
    net.lane_index.clear();
    net.intersection_index.clear();
    net.boundary_nodes.clear();

    for (size_t i = 0; i < net.nodes.size(); ++i) {
        const Node &n = net.nodes[i];
        if (n.id.empty()) throw ValidationError("node with empty id");
        if (!net.node_index.emplace(n.id, (int)i).second)
            throw ValidationError("duplicate node id: " + n.id);
        if (n.boundary) net.boundary_nodes.push_back(n.id);
    }

    for (size_t i = 0; i < net.roads.size(); ++i) {
        const Road &r = net.roads[i];
        if (!net.road_index.emplace(r.id, (int)i).second)
            throw ValidationError("duplicate road id: " + r.id);
        if (!net.node_index.count(r.from))
            throw ValidationError("road " + r.id + " references unknown node: " + r.from);
        if (!net.node_index.count(r.to))
            throw ValidationError("road " + r.id + " references unknown node: " + r.to);
        if (r.length <= 0.0) throw ValidationError("road " + r.id + " has non-positive length");
        if (r.lane_count < 1) throw ValidationError("road " + r.id + " has no lanes");
    }

    std::map<std::string, std::set<int>> lane_indices_per_road;
    for (size_t i = 0; i < net.lanes.size(); ++i) {
        const Lane &l = net.lanes[i];
        if (!net.lane_index.emplace(l.id, (int)i).second)
            throw ValidationError("duplicate lane id: " + l.id);
        if (!net.road_index.count(l.road))
            throw ValidationError("lane " + l.id + " references unknown road: " + l.road);
        if (l.length <= 0.0) throw ValidationError("lane " + l.id + " has non-positive length");
        if (l.index_within_road < 1)
            throw ValidationError("lane " + l.id + " has index < 1");
        if (!lane_indices_per_road[l.road].insert(l.index_within_road).second)
            throw ValidationError("lane " + l.id + " duplicates index " +
                                  std::to_string(l.index_within_road) + " on road " + l.road);
    }

    if (net.intersections.empty()) throw ValidationError("network has no intersections");

    for (size_t i = 0; i < net.intersections.size(); ++i) {
        Intersection &inter = net.intersections[i];
        if (!net.intersection_index.emplace(inter.id, (int)i).second)
            throw ValidationError("duplicate intersection id: " + inter.id);
        if (!net.node_index.count(inter.id))
            throw ValidationError("intersection " + inter.id + " has no matching node");

        std::set<std::string> upstream(inter.upstream_lanes.begin(), inter.upstream_lanes.end());
        std::set<std::string> downstream(inter.downstream_lanes.begin(),
                                         inter.downstream_lanes.end());
        if (upstream.size() != inter.upstream_lanes.size())
            throw ValidationError("intersection " + inter.id + " lists a duplicate upstream lane");
        if (downstream.size() != inter.downstream_lanes.size())
            throw ValidationError("intersection " + inter.id +
                                  " lists a duplicate downstream lane");
        for (const auto &lane_id : inter.upstream_lanes) {
            if (downstream.count(lane_id))
                throw ValidationError("intersection " + inter.id + " lane " + lane_id +
                                      " is both upstream and downstream");
            const Lane &l = net.lane(lane_id);
            if (net.road(l.road).to != inter.id)
                throw ValidationError("upstream lane " + lane_id + " does not end at " + inter.id);
        }
        for (const auto &lane_id : inter.downstream_lanes) {
            const Lane &l = net.lane(lane_id);
            if (net.road(l.road).from != inter.id)
                throw ValidationError("downstream lane " + lane_id + " does not start at " +
                                      inter.id);
        }

        for (const auto &m : inter.movements) {
            if (!upstream.count(m.from_lane))
                throw ValidationError("intersection " + inter.id + " movement from " +
                                      m.from_lane + " is not an upstream lane");
            if (!downstream.count(m.to_lane))
                throw ValidationError("intersection " + inter.id + " movement to " + m.to_lane +
                                      " is not a downstream lane");
        }

        if (inter.phases.size() < 2)
            throw ValidationError("intersection " + inter.id + " needs at least 2 phases");
        std::vector<char> covered(inter.movements.size(), 0);
        for (size_t p = 0; p < inter.phases.size(); ++p) {
            const SignalPhase &phase = inter.phases[p];
            if (phase.index != (int)p + 1)
                throw ValidationError("intersection " + inter.id +
                                      " phase indices must be contiguous from 1");
            if (phase.movements.empty())
                throw ValidationError("intersection " + inter.id + " phase " +
                                      std::to_string(phase.index) + " is empty");
            for (int mi : phase.movements) {
                if (mi < 0 || mi >= (int)inter.movements.size())
                    throw ValidationError("intersection " + inter.id + " phase " +
                                          std::to_string(phase.index) +
                                          " references undeclared movement " + std::to_string(mi));
                covered[mi] = 1;
            }
        }
        for (size_t mi = 0; mi < covered.size(); ++mi) {
            if (!covered[mi])
                throw ValidationError("intersection " + inter.id + " movement " +
                                      std::to_string(mi) + " (" + inter.movements[mi].from_lane +
                                      " -> " + inter.movements[mi].to_lane +
                                      ") is not covered by any phase");
        }
    }

    // Signatures need the lookup tables, so fill them last.
    for (auto &inter : net.intersections) {
        inter.type_signature = intersection_type_id(net, inter);
    }
}

// --- serialization --------------------------------------------------------

namespace {

ordered_json network_to_json(const RoadNetwork &net) {
    ordered_json doc;
    doc["nodes"] = ordered_json::array();
    for (const auto &n : net.nodes) {
        doc["nodes"].push_back({{"id", n.id}, {"boundary", n.boundary}});
    }
    doc["roads"] = ordered_json::array();
    for (const auto &r : net.roads) {
        doc["roads"].push_back({{"id", r.id},
                                {"from", r.from},
                                {"to", r.to},
                                {"length", r.length},
                                {"lanes", r.lane_count}});
    }
    doc["lanes"] = ordered_json::array();
    for (const auto &l : net.lanes) {
        doc["lanes"].push_back({{"id", l.id},
                                {"road", l.road},
                                {"length", l.length},
                                {"index", l.index_within_road}});
    }
    doc["intersections"] = ordered_json::array();
    for (const auto &inter : net.intersections) {
        ordered_json j;
        j["id"] = inter.id;
        j["shape"] = shape_name(inter.shape);
        j["upstream_lanes"] = inter.upstream_lanes;
        j["downstream_lanes"] = inter.downstream_lanes;
        j["movements"] = ordered_json::array();
        for (const auto &m : inter.movements) {
            j["movements"].push_back(
                {{"from", m.from_lane}, {"to", m.to_lane}, {"turn", turn_name(m.turn)}});
        }
        j["phases"] = ordered_json::array();
        for (const auto &p : inter.phases) {
            j["phases"].push_back({{"index", p.index}, {"movements", p.movements}});
        }
        doc["intersections"].push_back(std::move(j));
    }
    return doc;
}

RoadNetwork network_from_json(const ordered_json &doc) {
    RoadNetwork net;
    if (!doc.is_object()) throw ParseError("network document must be a JSON object");
    for (const char *key : {"nodes", "roads", "lanes", "intersections"}) {
        if (!doc.contains(key) || !doc.at(key).is_array())
            throw ParseError(std::string("network document missing array section: ") + key);
    }
    for (const auto &jn : doc.at("nodes")) {
        Node n;
        n.id = jn.at("id").get<std::string>();
        n.boundary = jn.value("boundary", false);
        net.nodes.push_back(std::move(n));
    }
    for (const auto &jr : doc.at("roads")) {
        Road r;
        r.id = jr.at("id").get<std::string>();
        r.from = jr.at("from").get<std::string>();
        r.to = jr.at("to").get<std::string>();
        r.length = jr.at("length").get<double>();
        r.lane_count = jr.at("lanes").get<int>();
        net.roads.push_back(std::move(r));
    }
    for (const auto &jl : doc.at("lanes")) {
        Lane l;
        l.id = jl.at("id").get<std::string>();
        l.road = jl.at("road").get<std::string>();
        l.length = jl.at("length").get<double>();
        l.index_within_road = jl.at("index").get<int>();
        net.lanes.push_back(std::move(l));
    }
    for (const auto &ji : doc.at("intersections")) {
        Intersection inter;
        inter.id = ji.at("id").get<std::string>();
        inter.shape = shape_from_name(ji.at("shape").get<std::string>());
        inter.upstream_lanes = ji.at("upstream_lanes").get<std::vector<std::string>>();
        inter.downstream_lanes = ji.at("downstream_lanes").get<std::vector<std::string>>();
        for (const auto &jm : ji.at("movements")) {
            TrafficMovement m;
            m.from_lane = jm.at("from").get<std::string>();
            m.to_lane = jm.at("to").get<std::string>();
            m.turn = turn_from_name(jm.at("turn").get<std::string>());
            inter.movements.push_back(std::move(m));
        }
        for (const auto &jp : ji.at("phases")) {
            SignalPhase p;
            p.index = jp.at("index").get<int>();
            p.movements = jp.at("movements").get<std::vector<int>>();
            inter.phases.push_back(std::move(p));
        }
        net.intersections.push_back(std::move(inter));
    }
    validate_network(net);
    return net;
}

} // namespace

std::string serialize_network(const RoadNetwork &net) {
    return network_to_json(net).dump(2) + "\n";
}

RoadNetwork parse_network(const std::string &json_text) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(json_text);
    } catch (const nlohmann::json::exception &e) {
        throw ParseError(std::string("invalid network JSON: ") + e.what());
    }
    try {
        return network_from_json(doc);
    } catch (const nlohmann::json::exception &e) {
        throw ParseError(std::string("malformed network document: ") + e.what());
    }
}

RoadNetwork load_network(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open network file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_network(buf.str());
}

void save_network(const RoadNetwork &net, const std::string &path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write network file: " + path);
    out << serialize_network(net);
}

// --- built-in templates ----------------------------------------------------

namespace {

struct NetBuilder {
    RoadNetwork net;
    int road_counter = 1;

    void add_node(const std::string &id, bool boundary) {
        net.nodes.push_back({id, boundary});
    }

    void add_lanes(const std::string &road_id, int count, double length) {
        for (int j = 1; j <= count; ++j) {
            net.lanes.push_back({road_id + "_" + std::to_string(j), road_id, length, j});
        }
    }

    // Directed pair between two existing nodes; returns the forward road id
    // ("road#n", a -> b). The reverse is "-road#n".
    std::string add_road_pair(const std::string &a, const std::string &b, int lanes,
                              double length) {
        std::string fwd = "road#" + std::to_string(road_counter++);
        std::string rev = "-" + fwd;
        net.roads.push_back({fwd, a, b, length, lanes});
        net.roads.push_back({rev, b, a, length, lanes});
        add_lanes(fwd, lanes, length);
        add_lanes(rev, lanes, length);
        return fwd;
    }
};

// One approach arm as seen from the intersection.
struct Arm {
    std::string in_road;  // road ending at the intersection
    std::string out_road; // road leaving it
    int lanes = 0;
};

std::string lane_id(const std::string &road, int j) { return road + "_" + std::to_string(j); }

void push_movement(Intersection &inter, std::vector<int> &phase, const Arm &from, int from_lane,
                   const Arm &to, int to_lane, TurnType turn) {
    phase.push_back((int)inter.movements.size());
    inter.movements.push_back({lane_id(from.in_road, from_lane), lane_id(to.out_road, to_lane), turn});
}

void finish_phases(Intersection &inter, std::vector<std::vector<int>> phases) {
    int idx = 1;
    for (auto &p : phases) {
        inter.phases.push_back({idx++, std::move(p)});
    }
}

// Appendix-style cross plan: the highest lane carries through + left, lane 1
// carries right + u-turn, middle lanes go through. Axis (1,3) then (2,4),
// each split into a through/left phase and a right/u-turn phase.
void build_cross_movements(Intersection &inter, const std::vector<Arm> &arms) {
    auto opp = [](int a) { return (a + 2) % 4; };
    auto right_of = [](int a) { return (a + 1) % 4; };
    auto left_of = [](int a) { return (a + 3) % 4; };

    int L = arms[0].lanes;
    std::vector<std::vector<int>> phases;
    for (int axis = 0; axis < 2; ++axis) {
        std::vector<int> major, minor;
        for (int a : {axis, axis + 2}) {
            if (L >= 2) {
                push_movement(inter, major, arms[a], L, arms[opp(a)], L, TurnType::Through);
                push_movement(inter, major, arms[a], L, arms[left_of(a)], L, TurnType::Left);
                push_movement(inter, minor, arms[a], 1, arms[right_of(a)], 1, TurnType::Right);
                push_movement(inter, minor, arms[a], 1, arms[a], 1, TurnType::UTurn);
                for (int j = 2; j < L; ++j)
                    push_movement(inter, major, arms[a], j, arms[opp(a)], j, TurnType::Through);
            } else {
                push_movement(inter, major, arms[a], 1, arms[opp(a)], 1, TurnType::Through);
                push_movement(inter, major, arms[a], 1, arms[left_of(a)], 1, TurnType::Left);
                push_movement(inter, major, arms[a], 1, arms[right_of(a)], 1, TurnType::Right);
                push_movement(inter, major, arms[a], 1, arms[a], 1, TurnType::UTurn);
            }
        }
        phases.push_back(std::move(major));
        if (!minor.empty()) phases.push_back(std::move(minor));
    }
    finish_phases(inter, std::move(phases));
}

// Arms 0 and 2 form the bar, arm 1 is the stem.
void build_tee_movements(Intersection &inter, const std::vector<Arm> &arms) {
    int L = arms[0].lanes;
    int top = std::max(L, 1);
    std::vector<int> bar_through, stem, bar_turns;
    for (int a : {0, 2}) {
        int other = (a == 0) ? 2 : 0;
        push_movement(inter, bar_through, arms[a], top, arms[other], top, TurnType::Through);
        push_movement(inter, bar_turns, arms[a], 1, arms[1], std::min(a == 0 ? 1 : 2, top),
                      a == 0 ? TurnType::Right : TurnType::Left);
    }
    push_movement(inter, stem, arms[1], 1, arms[0], 1, TurnType::Left);
    push_movement(inter, stem, arms[1], top, arms[2], top, TurnType::Right);
    finish_phases(inter, {std::move(bar_through), std::move(stem), std::move(bar_turns)});
}

// Three mutually adjacent arms; one phase per arm.
void build_wye_movements(Intersection &inter, const std::vector<Arm> &arms) {
    int L = arms[0].lanes;
    int top = std::max(L, 1);
    std::vector<std::vector<int>> phases;
    for (int a = 0; a < 3; ++a) {
        int next = (a + 1) % 3;
        int prev = (a + 2) % 3;
        std::vector<int> phase;
        push_movement(inter, phase, arms[a], top, arms[next], top, TurnType::Left);
        push_movement(inter, phase, arms[a], 1, arms[prev], 1, TurnType::Right);
        phases.push_back(std::move(phase));
    }
    finish_phases(inter, std::move(phases));
}

// Metering plan: each phase admits one arm into the circle, modeled as
// direct movements to the exit arms.
void build_roundabout_movements(Intersection &inter, const std::vector<Arm> &arms) {
    auto opp = [](int a) { return (a + 2) % 4; };
    auto right_of = [](int a) { return (a + 1) % 4; };
    auto left_of = [](int a) { return (a + 3) % 4; };
    int L = arms[0].lanes;
    int top = std::max(L, 1);
    std::vector<std::vector<int>> phases;
    for (int a = 0; a < 4; ++a) {
        std::vector<int> phase;
        push_movement(inter, phase, arms[a], top, arms[opp(a)], top, TurnType::Through);
        push_movement(inter, phase, arms[a], top, arms[left_of(a)], top, TurnType::Left);
        push_movement(inter, phase, arms[a], 1, arms[right_of(a)], 1, TurnType::Right);
        phases.push_back(std::move(phase));
    }
    finish_phases(inter, std::move(phases));
}

void build_intersection(RoadNetwork &net, const std::string &id, IntersectionShape shape,
                        const std::vector<Arm> &arms) {
    Intersection inter;
    inter.id = id;
    inter.shape = shape;
    for (const auto &arm : arms) {
        for (int j = 1; j <= arm.lanes; ++j) inter.upstream_lanes.push_back(lane_id(arm.in_road, j));
    }
    for (const auto &arm : arms) {
        for (int j = 1; j <= arm.lanes; ++j)
            inter.downstream_lanes.push_back(lane_id(arm.out_road, j));
    }
    switch (shape) {
    case IntersectionShape::Cross: build_cross_movements(inter, arms); break;
    case IntersectionShape::Tee: build_tee_movements(inter, arms); break;
    case IntersectionShape::Wye: build_wye_movements(inter, arms); break;
    case IntersectionShape::Roundabout: build_roundabout_movements(inter, arms); break;
    }
    net.intersections.push_back(std::move(inter));
}

int arm_count(IntersectionShape shape) {
    return (shape == IntersectionShape::Tee || shape == IntersectionShape::Wye) ? 3 : 4;
}

RoadNetwork make_single(IntersectionShape shape, int lanes, double length,
                        const std::string &id) {
    NetBuilder b;
    b.add_node(id, false);
    int arms_n = arm_count(shape);
    std::vector<Arm> arms;
    for (int a = 1; a <= arms_n; ++a) {
        std::string bnode = id + "_b" + std::to_string(a);
        b.add_node(bnode, true);
        std::string fwd = b.add_road_pair(bnode, id, lanes, length);
        arms.push_back({fwd, "-" + fwd, lanes});
    }
    build_intersection(b.net, id, shape, arms);
    validate_network(b.net);
    return b.net;
}

} // namespace

RoadNetwork make_cross(int lanes, double length, const std::string &id) {
    return make_single(IntersectionShape::Cross, lanes, length, id);
}
RoadNetwork make_tee(int lanes, double length, const std::string &id) {
    return make_single(IntersectionShape::Tee, lanes, length, id);
}
RoadNetwork make_wye(int lanes, double length, const std::string &id) {
    return make_single(IntersectionShape::Wye, lanes, length, id);
}
RoadNetwork make_roundabout(int lanes, double length, const std::string &id) {
    return make_single(IntersectionShape::Roundabout, lanes, length, id);
}

std::vector<TemplateEntry> builtin_templates() {
    std::vector<TemplateEntry> out;
    out.push_back({"cross", make_cross()});
    out.push_back({"tee", make_tee()});
    out.push_back({"wye", make_wye()});
    out.push_back({"roundabout", make_roundabout()});
    return out;
}

RoadNetwork make_chain_network(const std::vector<IntersectionShape> &shapes, int lanes,
                               double length) {
    if (shapes.empty()) throw ValidationError("chain network needs at least one intersection");
    NetBuilder b;
    int n = (int)shapes.size();
    for (int k = 0; k < n; ++k) b.add_node("X" + std::to_string(k), false);
    b.add_node("B_west", true);
    b.add_node("B_east", true);

    // Link roads along the chain. links[k] joins X{k-1} (or B_west) to X{k}.
    std::vector<std::string> links(n + 1);
    links[0] = b.add_road_pair("B_west", "X0", lanes, length);
    for (int k = 1; k < n; ++k) {
        links[k] = b.add_road_pair("X" + std::to_string(k - 1), "X" + std::to_string(k), lanes,
                                   length);
    }
    links[n] = b.add_road_pair("X" + std::to_string(n - 1), "B_east", lanes, length);

    for (int k = 0; k < n; ++k) {
        std::string id = "X" + std::to_string(k);
        std::vector<Arm> arms;
        // Arm 0: west (forward link arrives here), arm 2 (or 1 for 3-arm
        // shapes placed on the bar): east.
        Arm west{links[k], "-" + links[k], lanes};
        Arm east{"-" + links[k + 1], links[k + 1], lanes};
        int extra = arm_count(shapes[k]) - 2;
        std::vector<Arm> side;
        for (int s = 0; s < extra; ++s) {
            std::string bnode = id + "_b" + std::to_string(s + 1);
            b.add_node(bnode, true);
            std::string fwd = b.add_road_pair(bnode, id, lanes, length);
            side.push_back({fwd, "-" + fwd, lanes});
        }
        if (arm_count(shapes[k]) == 4) {
            arms = {west, side[0], east, side[1]};
        } else if (shapes[k] == IntersectionShape::Tee) {
            // bar = west/east, stem = side arm (arm index 1)
            arms = {west, side[0], east};
        } else {
            arms = {west, east, side[0]};
        }
        build_intersection(b.net, id, shapes[k], arms);
    }
    validate_network(b.net);
    return b.net;
}

RoadNetwork make_jinan_like() {
    using S = IntersectionShape;
    std::vector<IntersectionShape> shapes = {S::Cross, S::Tee,  S::Cross, S::Wye,  S::Cross,
                                             S::Cross, S::Tee,  S::Cross, S::Roundabout,
                                             S::Cross, S::Tee,  S::Cross, S::Wye,  S::Cross,
                                             S::Cross, S::Tee,  S::Cross};
    return make_chain_network(shapes, 2, 300.0);
}

RoadNetwork resolve_network(const std::string &ref) {
    if (ref.rfind("builtin:", 0) == 0) {
        std::string name = ref.substr(8);
        if (name == "cross") return make_cross();
        if (name == "tee") return make_tee();
        if (name == "wye") return make_wye();
        if (name == "roundabout") return make_roundabout();
        if (name == "jinan17") return make_jinan_like();
        throw ParseError("unknown builtin network: " + name);
    }
    return load_network(ref);
}

} // namespace regtsc
