#pragma once

#include <stdexcept>
#include <utility>
#include <variant>

namespace funrl {

/// Minimal value-or-error holder (std::expected is C++23).
template <typename T, typename E>
class Expected {
 public:
  Expected(T value) : data_(std::in_place_index<0>, std::move(value)) {}
  Expected(E error) : data_(std::in_place_index<1>, std::move(error)) {}

  bool has_value() const noexcept { return data_.index() == 0; }
  explicit operator bool() const noexcept { return has_value(); }

  const T& value() const& {
    if (!has_value()) throw std::logic_error("Expected::value() on error state");
    return std::get<0>(data_);
  }
  T&& value() && {
    if (!has_value()) throw std::logic_error("Expected::value() on error state");
    return std::get<0>(std::move(data_));
  }
  const E& error() const& {
    if (has_value()) throw std::logic_error("Expected::error() on value state");
    return std::get<1>(data_);
  }

  const T& operator*() const& { return value(); }
  const T* operator->() const { return &value(); }

 private:
  std::variant<T, E> data_;
};

}  // namespace funrl
