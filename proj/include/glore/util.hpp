#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace glore {

inline constexpr const char* kVersion = "1.0.0";

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- string helpers ----

std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& s, char sep);
std::vector<std::string> split_ws(const std::string& s);
std::string lower(const std::string& s);
std::string strip_ws(const std::string& s);
std::string join(const std::vector<std::string>& parts, const std::string& sep);

// Doubles are serialized with 17 significant digits so that a read-back
// reproduces the exact bit pattern.
std::string fmt_g17(double x);
std::string fmt_fixed(double x, int digits);

// ---- hashing / files ----

uint64_t fnv1a64(const void* data, size_t n);
uint64_t fnv1a64_file(const std::string& path);
std::string hex64(uint64_t x);

std::string read_file(const std::string& path);

// Writes to "<path>.tmp" and renames, so readers never observe a truncated
// file. Parent directories are created as needed.
void atomic_write(const std::string& path, const std::string& content);

// Leading comment line for every report:
//   "# glore <version> seed=<seed> inputs=<name>:<fnv64>,..."
std::string report_header(uint64_t seed,
                          const std::vector<std::pair<std::string, std::string>>& inputs);

// ---- deterministic randomness ----
//
// All draws go through explicit arithmetic on mt19937_64 output; none of the
// distribution classes from <random> are used, so sequences are identical
// across standard library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next() { return gen_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // uniform in [0, n); n must be positive
  size_t index(size_t n) { return static_cast<size_t>(next() % n); }

  template <class T>
  void shuffle(std::vector<T>& xs) {
    for (size_t i = xs.size(); i > 1; --i) {
      std::swap(xs[i - 1], xs[index(i)]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace glore
