#pragma once

#include <string>
#include <vector>

namespace regtsc {

struct GuidanceItem {
    std::string id;
    std::string situation;
    std::string recommended_action;
    std::string intended_effect;
};

struct EmbeddingVector {
    std::vector<double> values;

    size_t dim() const { return values.size(); }
};

struct GuidanceRepository {
    std::vector<GuidanceItem> items;
    std::vector<EmbeddingVector> vectors; // aligned 1:1 with items

    size_t size() const { return items.size(); }
    bool empty() const { return items.empty(); }
};

} // namespace regtsc
