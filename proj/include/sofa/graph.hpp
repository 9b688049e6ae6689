#pragma once

#include <cstddef>
#include <vector>

namespace sofa {

using Adjacency = std::vector<std::vector<std::size_t>>;

/// Tarjan's algorithm with an explicit stack (safe for 10^5+ vertices).
/// Components are returned with sorted members, ordered by smallest member.
std::vector<std::vector<std::size_t>> strongly_connected_components(const Adjacency& graph);

}  // namespace sofa
