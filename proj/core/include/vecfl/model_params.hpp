#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace vecfl::fedcore {

struct Segment {
  std::string name;
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
  std::size_t length() const { return end - begin; }
  bool operator==(const Segment&) const = default;
};

// Ordered named segments that exactly partition [0, total).
class ParamLayout {
 public:
  ParamLayout() = default;
  static ParamLayout from_segments(std::vector<Segment> segments);

  std::size_t total() const { return total_; }
  const Segment& segment(const std::string& name) const;
  bool has_segment(const std::string& name) const;
  const std::vector<Segment>& segments() const { return segments_; }
  bool operator==(const ParamLayout&) const = default;

 private:
  std::vector<Segment> segments_;
  std::size_t total_ = 0;
};

// The unit every FL operation exchanges: a flat real vector plus its layout.
struct ModelParams {
  std::vector<double> values;
  ParamLayout layout;

  void validate() const;  // size match and finiteness
  bool same_layout(const ModelParams& other) const {
    return layout == other.layout;
  }
};

ModelParams zeros_like(const ModelParams& reference);

std::string to_json(const ModelParams& params);
ModelParams params_from_json(const std::string& text);

}  // namespace vecfl::fedcore
