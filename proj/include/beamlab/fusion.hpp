#pragma once

#include <mutex>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "beamlab/array_geometry.hpp"

namespace beamlab {

inline double chunk_midpoint(double chunk_timestamp, int frame_length, double sample_rate) {
    return chunk_timestamp + frame_length / (2.0 * sample_rate);
}

// Bounded ring of timestamped DoA estimates. Single writer (the vision
// consumer) and single reader (the beamformer); the internal mutex makes
// lookups atomic snapshots. Insertion timestamps must be non-decreasing;
// the oldest entries are evicted first.
class DoaHistory {
  public:
    explicit DoaHistory(std::size_t capacity) : capacity_(capacity) {
        if (capacity_ == 0)
            throw std::invalid_argument("DoaHistory capacity must be positive");
        entries_.reserve(capacity_);
    }

    void push(double timestamp, const DoaAngles<double>& doa) {
        std::lock_guard<std::mutex> lock(mutex_);
        if (!entries_.empty() && timestamp < newest_timestamp_unlocked())
            throw std::invalid_argument("DoaHistory timestamps must be non-decreasing");
        if (entries_.size() < capacity_) {
            entries_.push_back({timestamp, doa});
        } else {
            entries_[head_] = {timestamp, doa};
            head_ = (head_ + 1) % capacity_;
        }
    }

    // Latest entry with timestamp <= t; among equal timestamps, the most
    // recently inserted. Empty optional when the history is empty or every
    // entry is newer than t.
    std::optional<std::pair<double, DoaAngles<double>>> closest_not_future(double t) const {
        std::lock_guard<std::mutex> lock(mutex_);
        const std::size_t n = entries_.size();
        for (std::size_t i = 0; i < n; ++i) {
            // walk from the newest insertion backwards
            const std::size_t idx = (head_ + n - 1 - i) % n;
            if (entries_[idx].first <= t)
                return entries_[idx];
        }
        return std::nullopt;
    }

    std::size_t size() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return entries_.size();
    }

    std::size_t capacity() const { return capacity_; }

  private:
    double newest_timestamp_unlocked() const {
        const std::size_t n = entries_.size();
        const std::size_t idx = (head_ + n - 1) % n;
        return entries_[idx].first;
    }

    std::size_t capacity_;
    std::vector<std::pair<double, DoaAngles<double>>> entries_;
    std::size_t head_ = 0; // insertion point once the ring is full
    mutable std::mutex mutex_;
};

} // namespace beamlab
