#include "sofa/graph.hpp"

#include <algorithm>
#include <limits>

namespace sofa {

std::vector<std::vector<std::size_t>> strongly_connected_components(const Adjacency& graph) {
  constexpr std::size_t kUnvisited = std::numeric_limits<std::size_t>::max();
  const std::size_t n = graph.size();
  std::vector<std::size_t> order(n, kUnvisited), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::vector<std::vector<std::size_t>> components;

  struct Frame {
    std::size_t vertex;
    std::size_t next_edge;
  };
  std::vector<Frame> call;
  std::size_t counter = 0;

  for (std::size_t root = 0; root < n; ++root) {
    if (order[root] != kUnvisited) continue;
    call.push_back({root, 0});
    order[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;

    while (!call.empty()) {
      Frame& frame = call.back();
      const std::size_t v = frame.vertex;
      if (frame.next_edge < graph[v].size()) {
        const std::size_t w = graph[v][frame.next_edge++];
        if (order[w] == kUnvisited) {
          order[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], order[w]);
        }
        continue;
      }
      if (low[v] == order[v]) {
        std::vector<std::size_t> component;
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          component.push_back(w);
        } while (w != v);
        std::sort(component.begin(), component.end());
        components.push_back(std::move(component));
      }
      call.pop_back();
      if (!call.empty()) {
        const std::size_t parent = call.back().vertex;
        low[parent] = std::min(low[parent], low[v]);
      }
    }
  }
  std::sort(components.begin(), components.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return components;
}

}  // namespace sofa
