#pragma once

#include <cstddef>
#include <string>

#include "orbitgraph/egcn.hpp"

namespace orbitgraph {

inline constexpr int kCheckpointSchemaVersion = 1;

struct Checkpoint {
    Model model;
    std::string label;      // e.g. "physics" / "no-physics"
    std::size_t epoch = 0;  // epoch whose parameters these are

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::string checkpoint_to_string(const Checkpoint& ckpt);
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
// Throws ParseError / VersionError; shapes are checked against model_config.
Checkpoint checkpoint_from_string(const std::string& text);
Checkpoint load_checkpoint(const std::string& path);

} // namespace orbitgraph
