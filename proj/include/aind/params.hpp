#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include "aind/tensor.hpp"

namespace aind {

// Which part of the architecture a parameter belongs to. Drives the
// transfer-learning partition.
enum class Tag : std::uint8_t { kAin = 0, kEstimator = 1, kLastConv = 2, kBackbone = 3 };

std::string_view tag_name(Tag t);
Tag parse_tag(std::string_view s);

class TagSet {
 public:
  TagSet() = default;
  TagSet(std::initializer_list<Tag> tags) {
    for (Tag t : tags) insert(t);
  }
  static TagSet all() { return {Tag::kAin, Tag::kEstimator, Tag::kLastConv, Tag::kBackbone}; }

  void insert(Tag t) { bits_ |= bit(t); }
  void erase(Tag t) { bits_ &= static_cast<std::uint8_t>(~bit(t)); }
  bool contains(Tag t) const { return (bits_ & bit(t)) != 0; }
  bool empty() const { return bits_ == 0; }
  bool operator==(const TagSet&) const = default;

  // "{ain, estimator, last_conv}"
  std::string str() const;

 private:
  static std::uint8_t bit(Tag t) { return static_cast<std::uint8_t>(1u << static_cast<unsigned>(t)); }
  std::uint8_t bits_ = 0;
};

// Adam moments live next to the parameter they belong to.
template <typename T>
struct ParamEntry {
  std::string name;
  Tag tag = Tag::kBackbone;
  Var<T> value;
  std::vector<T> moment1;
  std::vector<T> moment2;
  std::int64_t steps = 0;
};

template <typename T>
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;
  ParamStore(ParamStore&&) = default;
  ParamStore& operator=(ParamStore&&) = default;

  // Registers a zero-initialized trainable tensor. Names must be unique.
  Var<T> add(std::string name, Tag tag, Shape shape) {
    for (const auto& e : entries_) {
      if (e.name == name) throw ConfigError("duplicate parameter name " + name);
    }
    auto v = make_var(Tensor<T>(shape), true);
    entries_.push_back(ParamEntry<T>{std::move(name), tag, v, {}, {}, 0});
    return v;
  }

  std::vector<ParamEntry<T>>& entries() { return entries_; }
  const std::vector<ParamEntry<T>>& entries() const { return entries_; }

  const ParamEntry<T>* find(std::string_view name) const {
    for (const auto& e : entries_) {
      if (e.name == name) return &e;
    }
    return nullptr;
  }

  void zero_grad() {
    for (auto& e : entries_) e.value->clear_grad();
  }

  std::size_t num_scalars() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value->size();
    return n;
  }
  std::size_t num_scalars(Tag tag) const {
    std::size_t n = 0;
    for (const auto& e : entries_) {
      if (e.tag == tag) n += e.value->size();
    }
    return n;
  }

 private:
  std::vector<ParamEntry<T>> entries_;
};

}  // namespace aind
