// SPDX-License-Identifier: Apache-2.0
//
// Image-feature providers standing in for a frozen vision encoder.
//
// Feature file format (plain text):
//   d_vis=<int>
//   <id> <v_1> ... <v_d_vis>      one line per sample, float32 values
#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vkg/corpus.hpp"

namespace vkg {

enum class FeatureKind { file_backed, synthetic };

class FeatureSource {
 public:
  static FeatureSource load_file(const std::filesystem::path& path);
  static FeatureSource from_vectors(std::size_t d_vis, std::map<std::string, std::vector<double>> vectors);
  // Recomputes features from each sample's triplets with the synthetic encoder.
  static FeatureSource synthetic(const SynthConfig& cfg, std::span<const InstructionSample> samples);

  FeatureKind kind() const { return kind_; }
  std::size_t d_vis() const { return d_vis_; }
  bool contains(std::string_view id) const;
  std::vector<std::string> ids() const;

  // Throws MissingFeatures for an undeclared id.
  std::vector<double> features_for(std::string_view id) const;

  void save(const std::filesystem::path& path) const;

 private:
  FeatureKind kind_ = FeatureKind::file_backed;
  std::size_t d_vis_ = 0;
  std::map<std::string, std::vector<double>, std::less<>> vectors_;
  SynthConfig synth_;
  std::map<std::string, KnowledgeGraph, std::less<>> graphs_;
};

inline std::vector<double> features_for(const FeatureSource& source, std::string_view id) {
  return source.features_for(id);
}

}  // namespace vkg
