#pragma once

#include <string>

#include "maea/fusion_space.hpp"

namespace maea {

// Full decimal precision: 17 significant digits, round-trips bit-exactly.
std::string format_g17(double v);

void write_matrix_csv(const std::string& path, const Mat& a);

// Model files: a structured text document holding the hosting space (feature
// descriptors, domain box, basis points, jitter, kernel scale) and the
// coefficient vector.  Writing the parsed document again reproduces the text
// byte for byte.
std::string model_to_text(const KnowledgeSpace& space, const RkhsFunction& f);
std::string model_to_text(const FusionSpace& fusion, const RkhsFunction& f);

struct ParsedModel {
  SpaceTag tag = SpaceTag::agent1;
  KnowledgeSpace space1;  // hosting space (agent models), or fusion part 1
  KnowledgeSpace space2;  // fusion models only
  double kernel_scale = 1.0;
  RkhsFunction function;
};

ParsedModel model_from_text(const std::string& text);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace maea
