#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "prospect/prospect.hpp"

namespace testing_support {

using namespace prospect;

inline VariableSpec binary(std::string name, Role role) { return {std::move(name), role, {"0", "1"}}; }

/// Random schema: binary A, D, Y and covariates whose cell count is at most
/// `max_x_cells`.
inline Schema random_schema(std::mt19937_64& rng, std::size_t max_x_cells = 8) {
  std::vector<VariableSpec> vars{binary("A", Role::sensitive)};
  std::size_t cells = 1;
  std::uniform_int_distribution<int> count(1, 3), card(2, 3);
  const int nx = count(rng);
  for (int i = 0; i < nx; ++i) {
    const std::size_t k = static_cast<std::size_t>(card(rng));
    if (cells * k > max_x_cells) break;
    cells *= k;
    VariableSpec v{"X" + std::to_string(i + 1), Role::covariate, {}};
    for (std::size_t l = 0; l < k; ++l) v.levels.push_back("l" + std::to_string(l));
    vars.push_back(std::move(v));
  }
  vars.push_back(binary("D", Role::decision));
  vars.push_back(binary("Y", Role::outcome));
  return Schema(std::move(vars));
}

/// Rows drawn uniformly over every variable's levels.
inline Dataset random_dataset(std::mt19937_64& rng, const Schema& schema, std::size_t n) {
  std::vector<Level> codes(n * schema.size());
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t v = 0; v < schema.size(); ++v) {
      std::uniform_int_distribution<int> pick(0, static_cast<int>(schema[v].cardinality()) - 1);
      codes[r * schema.size() + v] = static_cast<Level>(pick(rng));
    }
  return Dataset(schema, std::move(codes), Provenance::pre);
}

/// Fresh directory under the system temp area, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("prospect-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

inline void spit(const std::filesystem::path& p, const std::string& content) {
  std::ofstream f(p, std::ios::binary);
  f << content;
}

}  // namespace testing_support
