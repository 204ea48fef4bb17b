#pragma once

// Shared scalar types, error categories, deterministic RNG and parallelism
// helpers used across the library.

#include <complex>
#include <cstdint>
#include <functional>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

namespace kei {

using cplx = std::complex<double>;
using VecC = Eigen::VectorXcd;
using VecR = Eigen::VectorXd;
using MatC = Eigen::MatrixXcd;

// Error categories map onto CLI exit codes: validation = 1, numerical = 2, io = 3.
enum class ErrorKind { validation = 1, numerical = 2, io = 3 };

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail_validation(const std::string& msg) { throw Error(ErrorKind::validation, msg); }
[[noreturn]] inline void fail_numerical(const std::string& msg) { throw Error(ErrorKind::numerical, msg); }
[[noreturn]] inline void fail_io(const std::string& msg) { throw Error(ErrorKind::io, msg); }

// ---------------------------------------------------------------------------
// Deterministic RNG.
//
// All randomness flows through mt19937_64 seeded via splitmix64 so that a task
// index can derive an independent stream: results never depend on execution
// order or thread count. std:: distributions are avoided on purpose (their
// draw sequences are implementation-defined).

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(splitmix64(seed)) {}
  Rng(std::uint64_t seed, std::uint64_t stream) : gen_(splitmix64(splitmix64(seed) ^ (stream + 0x9e3779b97f4a7c15ULL))) {}

  // Uniform in [0,1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  // Box-Muller; one value per call keeps the draw sequence trivially reproducible.
  double gaussian() {
    double u = 0.0;
    do { u = uniform01(); } while (u <= 0.0);
    double v = uniform01();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586476925286766559 * v);
  }

  cplx cgaussian() {
    double re = gaussian();
    double im = gaussian();
    return cplx(re, im);
  }

  std::uint64_t raw() { return gen_(); }

private:
  std::mt19937_64 gen_;
};

// ---------------------------------------------------------------------------
// FNV-1a, used for content hashes in manifests and cross-file consistency checks.

inline std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a64(s.data(), s.size(), h);
}

inline std::string hash_hex(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Deterministic parallel loop.
//
// The index range is split into fixed chunks; each chunk writes only to its own
// output slots, so the result is byte-identical for every thread count. Any
// reduction over the produced values must be done sequentially by the caller.

inline int& global_thread_count() {
  static int n = 1;
  return n;
}

inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, int threads = 0) {
  if (threads <= 0) threads = global_thread_count();
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::size_t nt = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::thread> pool;
  pool.reserve(nt);
  std::exception_ptr first_error;
  std::mutex err_mutex;
  for (std::size_t t = 0; t < nt; ++t) {
    pool.emplace_back([&, t]() {
      try {
        for (std::size_t i = t; i < n; i += nt) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------

inline double binomial(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

inline long long binomial_ll(int n, int k) {
  return static_cast<long long>(binomial(n, k) + 0.5);
}

}  // namespace kei
