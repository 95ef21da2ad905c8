#pragma once

#include "maea/space.hpp"

namespace maea {

struct SelectionConfig {
  int candidates = 64;       // low-discrepancy candidates per attempt
  int max_attempts = 4;      // each attempt doubles the candidate pool
  double condition_cap = 1e8;
  std::vector<Vec> basis_points_1;  // explicit override; selected when empty
  std::vector<Vec> basis_points_2;
};

// The sum-kernel space: 2m basis points (m per agent), the block Gram, and
// the change-of-basis matrices onto each agent's block of fusion sections.
struct FusionSpace {
  KnowledgeSpace space1;   // scaled copies; basis points assigned
  KnowledgeSpace space2;
  std::vector<Vec> basis_points;  // x1 points then x2 points, 2m total
  Mat gram_full;           // K at all pairs, exact sum of the two scaled kernels
  Mat gram_block_1;        // Kt1 = K at agent-1 points (principal block)
  Mat gram_block_2;
  Mat cross_block;         // K12
  Mat change_basis_1;      // M1 with Kt1 * M1 = gram_local_1
  Mat change_basis_2;
  double kernel_scale = 1.0;

  int m() const { return space1.basis_size(); }
  int total_points() const { return static_cast<int>(basis_points.size()); }
};

double fusion_kernel_eval(const FusionSpace& fusion, const Vec& x, const Vec& y);

// [K(x, z_1), ..., K(x, z_2m)] over the concatenated basis.
Vec fusion_section_at(const FusionSpace& fusion, const Vec& x);

FusionSpace build_fusion_space(const KnowledgeSpace& s1, const KnowledgeSpace& s2,
                               const SelectionConfig& cfg = {});

const Mat& change_of_basis(const FusionSpace& fusion, int agent_id);

// alpha over agent sections -> block coordinates over fusion sections.
Vec to_block_coordinates(const FusionSpace& fusion, int agent_id, const Vec& alpha);

double rkhs_inner(const FusionSpace& fusion, const RkhsFunction& f, const RkhsFunction& g);
double rkhs_norm(const FusionSpace& fusion, const RkhsFunction& f);
double evaluate(const FusionSpace& fusion, const RkhsFunction& f, const Vec& x);

const KnowledgeSpace& agent_space(const FusionSpace& fusion, int agent_id);

}  // namespace maea
