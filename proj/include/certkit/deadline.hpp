// Copyright (c) certkit contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <limits>

namespace certkit {

/// Cooperative wall-clock budget. Verifiers poll expired() between major
/// steps (per branch, per LP, per layer); nothing is preempted.
class Deadline {
public:
    using Clock = std::chrono::steady_clock;

    static Deadline never() { return Deadline(Clock::time_point::max()); }

    static Deadline after(double seconds) {
        if (!(seconds < 1e9)) return never();
        const auto now = Clock::now();
        if (seconds <= 0.0) return Deadline(now);
        return Deadline(now + std::chrono::duration_cast<Clock::duration>(
                                  std::chrono::duration<double>(seconds)));
    }

    bool expired() const { return end_ != Clock::time_point::max() && Clock::now() >= end_; }

    double remaining_seconds() const {
        if (end_ == Clock::time_point::max()) return std::numeric_limits<double>::infinity();
        return std::chrono::duration<double>(end_ - Clock::now()).count();
    }

    /// The earlier of this deadline and one `seconds` from now.
    Deadline capped(double seconds) const {
        const Deadline other = after(seconds);
        return other.end_ < end_ ? other : *this;
    }

private:
    explicit Deadline(Clock::time_point end) : end_(end) {}

    Clock::time_point end_;
};

class Stopwatch {
public:
    Stopwatch() : start_(Deadline::Clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(Deadline::Clock::now() - start_).count();
    }

private:
    Deadline::Clock::time_point start_;
};

} // namespace certkit
