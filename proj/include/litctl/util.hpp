#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace litctl {

/// Lowercase hex SHA-256 of the bytes of `data`.
std::string sha256_hex(std::string_view data);

std::uint64_t splitmix64(std::uint64_t x);

/// Independent sub-seed for item `index` of a run seeded with `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// Uniform double in [0, 1) from the top 53 bits of `bits`.
inline double unit_interval(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

/// A computed value or the exception that prevented it.
template <typename T>
struct Outcome {
    std::optional<T> value;
    std::exception_ptr error;

    bool ok() const { return value.has_value(); }
};

/// Runs fn(0..n-1) on at most `max_inflight` threads. Results are in index
/// order regardless of completion order; exceptions are captured per index.
template <typename T>
std::vector<Outcome<T>> bounded_map(std::size_t n, std::size_t max_inflight,
                                    const std::function<T(std::size_t)>& fn)
{
    std::vector<Outcome<T>> out(n);
    auto run_one = [&](std::size_t i) {
        try {
            out[i].value.emplace(fn(i));
        } catch (...) {
            out[i].error = std::current_exception();
        }
    };
    const std::size_t workers = std::min(n, std::max<std::size_t>(1, max_inflight));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            run_one(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++)
                    run_one(i);
            });
    }
    return out;
}

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

/// Fixed-point decimal rendering used by reports; locale independent.
std::string format_fixed(double value, int decimals);

std::string trim_copy(std::string_view s);
std::string to_lower(std::string_view s);

} // namespace litctl
