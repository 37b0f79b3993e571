#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "funrl/callspec.hpp"

namespace funrl {

enum class Category { Simple, Multiple, Parallel, ParallelMultiple, Irrelevance };

inline constexpr Category kAllCategories[] = {Category::Simple, Category::Multiple, Category::Parallel,
                                              Category::ParallelMultiple, Category::Irrelevance};

std::string_view to_string(Category category);
/// Throws std::invalid_argument for unknown names.
Category category_from_string(std::string_view name);

/// One (query, tool set, reference) record. The reference is either a
/// serialized call list or free text.
struct Sample {
  std::string id;
  std::string query;
  std::vector<callspec::ToolSchema> tools;
  std::string reference;
  Category category = Category::Simple;
};

}  // namespace funrl
