#include "aind/params.hpp"

#include <array>

#include "aind/errors.hpp"

namespace aind {

std::string_view tag_name(Tag t) {
  switch (t) {
    case Tag::kAin:
      return "ain";
    case Tag::kEstimator:
      return "estimator";
    case Tag::kLastConv:
      return "last_conv";
    case Tag::kBackbone:
      return "backbone";
  }
  return "unknown";
}

Tag parse_tag(std::string_view s) {
  for (Tag t : {Tag::kAin, Tag::kEstimator, Tag::kLastConv, Tag::kBackbone}) {
    if (tag_name(t) == s) return t;
  }
  throw ConfigError("unknown parameter tag '" + std::string(s) + "'");
}

std::string TagSet::str() const {
  std::string out = "{";
  bool first = true;
  for (Tag t : {Tag::kAin, Tag::kEstimator, Tag::kLastConv, Tag::kBackbone}) {
    if (!contains(t)) continue;
    if (!first) out += ", ";
    out += tag_name(t);
    first = false;
  }
  return out + "}";
}

}  // namespace aind
