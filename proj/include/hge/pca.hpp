#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hge/embedding.hpp"
#include "hge/linalg.hpp"

namespace hge {

struct PcaConfig {
  std::size_t max_iterations = 20000;
  double tolerance = 1e-13;  // on the change of the unit eigenvector
};

struct Projection {
  std::vector<std::string> ids;
  Matrix coords;                       // n x 2
  Matrix components;                   // 2 x dim, orthonormal rows
  std::array<double, 2> eigenvalues{};  // of the covariance, descending
};

// Centers the rows and finds the top two covariance eigenvectors by power
// iteration with deflation. Needs at least 2 rows and dim >= 2; all-equal rows
// (rank 0) are rejected. Component signs are fixed so the entry of largest
// magnitude is positive.
Projection project_pca(const EmbeddingTable& table, const PcaConfig& cfg = {});

// `id,x,y`
void save_projection_csv(const std::filesystem::path& path, const Projection& projection);
// Scatter plot; points are colored by `groups[id]` when present.
void save_projection_svg(const std::filesystem::path& path, const Projection& projection,
                         const std::map<std::string, std::string>& groups, const std::string& title);

}  // namespace hge
