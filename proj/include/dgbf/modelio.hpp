#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "dgbf/ensemble.hpp"

namespace dgbf::modelio {

inline constexpr int kFormatVersion = 1;

class ModelIOError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// JSON text; see docs/model-format.md.
std::string serialize(const ForestModel& model);
ForestModel deserialize(const std::string& text);

void save(const ForestModel& model, const std::filesystem::path& path);
ForestModel load(const std::filesystem::path& path);

}  // namespace dgbf::modelio
