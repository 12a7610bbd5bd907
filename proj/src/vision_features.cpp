// SPDX-License-Identifier: Apache-2.0
#include "vkg/vision_features.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>

#include "vkg/errors.hpp"
#include "vkg/text.hpp"

namespace vkg {

FeatureSource FeatureSource::load_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open feature file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("d_vis=", 0) != 0) {
    throw FormatError(path.string() + ": first line must be d_vis=<int>");
  }
  FeatureSource src;
  try {
    src.d_vis_ = std::stoul(line.substr(6));
  } catch (const std::exception&) {
    throw FormatError(path.string() + ": bad d_vis header '" + line + "'");
  }
  if (src.d_vis_ == 0) throw FormatError(path.string() + ": d_vis must be positive");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    auto fields = split_whitespace(line);
    if (fields.empty()) continue;
    if (fields.size() != src.d_vis_ + 1) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(src.d_vis_) + " values, got " + std::to_string(fields.size() - 1));
    }
    std::vector<double> v;
    v.reserve(src.d_vis_);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      float f = 0.0f;
      const auto& s = fields[i];
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), f);
      if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + s + "'");
      }
      v.push_back(static_cast<double>(f));
    }
    if (!src.vectors_.emplace(fields[0], std::move(v)).second) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": duplicate id '" + fields[0] + "'");
    }
  }
  return src;
}

FeatureSource FeatureSource::from_vectors(std::size_t d_vis, std::map<std::string, std::vector<double>> vectors) {
  FeatureSource src;
  src.d_vis_ = d_vis;
  for (auto& [id, v] : vectors) {
    if (v.size() != d_vis) {
      throw ShapeError("feature vector for '" + id + "' has " + std::to_string(v.size()) +
                       " values, expected " + std::to_string(d_vis));
    }
    src.vectors_.emplace(id, std::move(v));
  }
  return src;
}

FeatureSource FeatureSource::synthetic(const SynthConfig& cfg, std::span<const InstructionSample> samples) {
  validate(cfg);
  FeatureSource src;
  src.kind_ = FeatureKind::synthetic;
  src.d_vis_ = cfg.d_vis;
  src.synth_ = cfg;
  for (const auto& s : samples) src.graphs_.emplace(s.id, s.output_triplets);
  return src;
}

bool FeatureSource::contains(std::string_view id) const {
  return kind_ == FeatureKind::synthetic ? graphs_.find(id) != graphs_.end()
                                         : vectors_.find(id) != vectors_.end();
}

std::vector<std::string> FeatureSource::ids() const {
  std::vector<std::string> out;
  if (kind_ == FeatureKind::synthetic) {
    for (const auto& [id, _] : graphs_) out.push_back(id);
  } else {
    for (const auto& [id, _] : vectors_) out.push_back(id);
  }
  return out;
}

std::vector<double> FeatureSource::features_for(std::string_view id) const {
  if (kind_ == FeatureKind::synthetic) {
    auto it = graphs_.find(id);
    if (it == graphs_.end()) throw MissingFeatures("no image features for sample '" + std::string(id) + "'");
    return synthetic_image_features(it->second, id, synth_);
  }
  auto it = vectors_.find(id);
  if (it == vectors_.end()) throw MissingFeatures("no image features for sample '" + std::string(id) + "'");
  return it->second;
}

void FeatureSource::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write feature file " + path.string());
  out << "d_vis=" << d_vis_ << '\n';
  char buf[32];
  for (const auto& id : ids()) {
    out << id;
    for (double v : features_for(id)) {
      std::snprintf(buf, sizeof buf, " %.9g", static_cast<double>(static_cast<float>(v)));
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace vkg
