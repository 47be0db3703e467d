#pragma once

#include <set>
#include <string>
#include <vector>

#include "igprobe/image.hpp"

namespace igprobe {

struct Sample {
    ImageBuf image;
    std::size_t label = 0;
    std::string id;
};

/// Labeled images sharing one shape. Labels index into class_names.
struct Dataset {
    std::vector<Sample> items;
    std::vector<std::string> class_names;

    std::size_t size() const noexcept { return items.size(); }
    std::size_t num_classes() const noexcept { return class_names.size(); }

    void validate() const {
        std::set<std::string> ids;
        for (const auto& s : items) {
            if (s.label >= class_names.size())
                throw Error("item '" + s.id + "' has label " + std::to_string(s.label) +
                            " but only " + std::to_string(class_names.size()) + " classes");
            if (!ids.insert(s.id).second) throw Error("duplicate id '" + s.id + "'");
            if (s.image.shape() != items.front().image.shape())
                throw Error("item '" + s.id + "' has shape " + shape_str(s.image.shape()) +
                            ", expected " + shape_str(items.front().image.shape()));
        }
    }
};

}  // namespace igprobe
