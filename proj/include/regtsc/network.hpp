#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "regtsc/errors.hpp"

namespace regtsc {

enum class IntersectionShape { Cross, Tee, Wye, Roundabout };
enum class TurnType { Through, Left, Right, UTurn };

const char *shape_name(IntersectionShape shape);
IntersectionShape shape_from_name(const std::string &name);
const char *turn_name(TurnType turn);
TurnType turn_from_name(const std::string &name);

struct Node {
    std::string id;
    bool boundary = false;
};

// Directed edge. Bidirectional streets are modeled as a pair of roads; by
// convention the reverse direction of "road#3" is named "-road#3".
struct Road {
    std::string id;
    std::string from;
    std::string to;
    double length = 0.0;
    int lane_count = 0;
};

struct Lane {
    std::string id;
    std::string road;
    double length = 0.0;
    int index_within_road = 1;
};

struct TrafficMovement {
    std::string from_lane;
    std::string to_lane;
    TurnType turn = TurnType::Through;
};

struct SignalPhase {
    int index = 0;                // 1-based, contiguous per intersection
    std::vector<int> movements;   // indices into Intersection::movements
};

struct Intersection {
    std::string id;
    IntersectionShape shape = IntersectionShape::Cross;
    std::vector<std::string> upstream_lanes;
    std::vector<std::string> downstream_lanes;
    std::vector<TrafficMovement> movements;
    std::vector<SignalPhase> phases;
    std::string type_signature; // filled during validation

    int phase_count() const { return static_cast<int>(phases.size()); }
};

struct RoadNetwork {
    std::vector<Node> nodes;
    std::vector<Road> roads;
    std::vector<Lane> lanes;
    std::vector<Intersection> intersections;
    std::vector<std::string> boundary_nodes;

    // Lookup tables, rebuilt by validate().
    std::unordered_map<std::string, int> node_index;
    std::unordered_map<std::string, int> road_index;
    std::unordered_map<std::string, int> lane_index;
    std::unordered_map<std::string, int> intersection_index;

    const Lane &lane(const std::string &id) const;
    const Road &road(const std::string &id) const;
    const Intersection *intersection(const std::string &id) const;

    // Intersection controlling the stop line of this lane, or nullptr when
    // the lane's road ends at a boundary node.
    const Intersection *head_intersection(const std::string &lane_id) const;

    // Distinct type signatures (defines N for the sampler).
    std::vector<std::string> type_signatures() const;
};

// Canonical layout signature: shape, sorted per-approach lane counts, phase
// count. Equal layouts produce equal signatures.
std::string intersection_type_id(const RoadNetwork &net, const Intersection &inter);

// Rebuilds lookup tables, checks reference integrity, lane/phase invariants
// and movement coverage, and fills type signatures. Throws ValidationError.
void validate_network(RoadNetwork &net);

RoadNetwork load_network(const std::string &path);
RoadNetwork parse_network(const std::string &json_text);
std::string serialize_network(const RoadNetwork &net);
void save_network(const RoadNetwork &net, const std::string &path);

// --- built-in templates -------------------------------------------------
//
// Each template is a complete validated single-intersection network whose
// approach roads start and end at boundary nodes.

RoadNetwork make_cross(int lanes_per_approach = 2, double road_length = 300.0,
                       const std::string &id = "X0");
RoadNetwork make_tee(int lanes_per_approach = 2, double road_length = 300.0,
                     const std::string &id = "T0");
RoadNetwork make_wye(int lanes_per_approach = 2, double road_length = 300.0,
                     const std::string &id = "Y0");
RoadNetwork make_roundabout(int lanes_per_approach = 1, double road_length = 300.0,
                            const std::string &id = "R0");

struct TemplateEntry {
    std::string name;
    RoadNetwork network;
};

// One parameterized instance per shape, all validated.
std::vector<TemplateEntry> builtin_templates();

// Chain of heterogeneous intersections joined west-to-east; remaining arms
// terminate at boundary nodes. Shape of the k-th intersection comes from
// `shapes`; lane counts per approach from `lanes_per_approach`.
RoadNetwork make_chain_network(const std::vector<IntersectionShape> &shapes,
                               int lanes_per_approach = 2, double road_length = 300.0);

// 17-intersection mixed network (Cross x10, Tee x4, Wye x2, Roundabout x1).
RoadNetwork make_jinan_like();

// Resolves "builtin:<name>" (cross, tee, wye, roundabout, jinan17) or a
// filesystem path.
RoadNetwork resolve_network(const std::string &path_or_builtin);

} // namespace regtsc
