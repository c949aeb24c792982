#include "vecfl/model_params.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace vecfl::fedcore {

ParamLayout ParamLayout::from_segments(std::vector<Segment> segments) {
  if (segments.empty()) {
    throw std::invalid_argument("ParamLayout: at least one segment required");
  }
  std::size_t cursor = 0;
  std::set<std::string> names;
  for (const auto& seg : segments) {
    if (seg.name.empty()) {
      throw std::invalid_argument("ParamLayout: segment name must be nonempty");
    }
    if (!names.insert(seg.name).second) {
      throw std::invalid_argument("ParamLayout: duplicate segment " + seg.name);
    }
    if (seg.begin != cursor || seg.end <= seg.begin) {
      throw std::invalid_argument(
          "ParamLayout: segments must exactly partition the vector");
    }
    cursor = seg.end;
  }
  ParamLayout layout;
  layout.segments_ = std::move(segments);
  layout.total_ = cursor;
  return layout;
}

const Segment& ParamLayout::segment(const std::string& name) const {
  for (const auto& seg : segments_) {
    if (seg.name == name) return seg;
  }
  throw std::invalid_argument("ParamLayout: unknown segment " + name);
}

bool ParamLayout::has_segment(const std::string& name) const {
  for (const auto& seg : segments_) {
    if (seg.name == name) return true;
  }
  return false;
}

void ModelParams::validate() const {
  if (values.size() != layout.total()) {
    throw std::invalid_argument("ModelParams: values do not match layout");
  }
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("ModelParams: non-finite value");
    }
  }
}

ModelParams zeros_like(const ModelParams& reference) {
  ModelParams out;
  out.layout = reference.layout;
  out.values.assign(reference.values.size(), 0.0);
  return out;
}

std::string to_json(const ModelParams& params) {
  nlohmann::json j;
  j["layout"] = nlohmann::json::array();
  for (const auto& seg : params.layout.segments()) {
    j["layout"].push_back(
        {{"name", seg.name}, {"begin", seg.begin}, {"end", seg.end}});
  }
  j["values"] = params.values;
  return j.dump() + "\n";
}

ModelParams params_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  std::vector<Segment> segments;
  for (const auto& js : j.at("layout")) {
    segments.push_back({js.at("name").get<std::string>(),
                        js.at("begin").get<std::size_t>(),
                        js.at("end").get<std::size_t>()});
  }
  ModelParams params;
  params.layout = ParamLayout::from_segments(std::move(segments));
  params.values = j.at("values").get<std::vector<double>>();
  params.validate();
  return params;
}

}  // namespace vecfl::fedcore
