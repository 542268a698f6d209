#pragma once

#include "gridswitch/comm.hpp"
#include "gridswitch/grid.hpp"
#include "gridswitch/secondary.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace testing {

inline std::filesystem::path config_path(const std::string& name) {
  return std::filesystem::path(GRIDSWITCH_CONFIG_DIR) / (name + ".yaml");
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("gridswitch_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Path 0 -> 1 -> ... -> n-1.
inline gridswitch::Arborescence path_tree(std::size_t n) {
  std::vector<gridswitch::Edge> edges;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    edges.push_back({i, i + 1});
  }
  return gridswitch::Arborescence(n, 0, edges);
}

/// Star rooted at `root`.
inline gridswitch::Arborescence star_tree(std::size_t n, std::size_t root) {
  std::vector<gridswitch::Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    if (i != root) {
      edges.push_back({root, i});
    }
  }
  return gridswitch::Arborescence(n, root, edges);
}

/// Connected random graph: random spanning tree plus extra links with probability p.
inline gridswitch::CommGraph random_connected(std::size_t n, double p, std::mt19937_64& rng) {
  std::set<gridswitch::Link> links;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 1; i < n; ++i) {
    const auto j = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
    links.insert(gridswitch::Link(i, j));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (u(rng) < p) {
        links.insert(gridswitch::Link(i, j));
      }
    }
  }
  return gridswitch::CommGraph(n, links);
}

} // namespace testing
