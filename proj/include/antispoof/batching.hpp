#pragma once

// Balanced mini-batches: every batch holds batch_size/2 bona fide and
// batch_size/2 spoof utterances. The epoch covers the majority class once
// (shuffled); the minority class is oversampled with replacement. With equal
// class sizes both classes are plain shuffled permutations.

#include <algorithm>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace antispoof {

struct BatchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Batch {
  std::vector<std::size_t> bonafide;  // indices into the caller's bona fide list
  std::vector<std::size_t> spoof;     // indices into the caller's spoof list
};

inline std::vector<Batch> balanced_batches(std::size_t n_bonafide, std::size_t n_spoof,
                                           std::size_t batch_size, std::mt19937_64& rng) {
  if (n_bonafide == 0 || n_spoof == 0)
    throw BatchError("balanced_batches: both classes must be nonempty");
  if (batch_size < 2 || batch_size % 2 != 0)
    throw BatchError("balanced_batches: batch size must be even and >= 2");
  std::size_t half = batch_size / 2;
  std::size_t majority = std::max(n_bonafide, n_spoof);
  std::size_t n_batches = std::max<std::size_t>(1, majority / half);

  auto permutation = [&](std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
  };
  auto draw = [&](std::vector<std::size_t>& pool, std::size_t class_size, std::size_t& cursor,
                  bool with_replacement) {
    if (with_replacement) {
      std::uniform_int_distribution<std::size_t> dist(0, class_size - 1);
      return dist(rng);
    }
    if (cursor >= pool.size()) {
      pool = permutation(class_size);
      cursor = 0;
    }
    return pool[cursor++];
  };

  std::vector<std::size_t> bona_pool = permutation(n_bonafide);
  std::vector<std::size_t> spoof_pool = permutation(n_spoof);
  std::size_t bona_cursor = 0, spoof_cursor = 0;
  bool bona_minor = n_bonafide < n_spoof;
  bool spoof_minor = n_spoof < n_bonafide;

  std::vector<Batch> out(n_batches);
  for (auto& b : out) {
    b.bonafide.reserve(half);
    b.spoof.reserve(half);
    for (std::size_t i = 0; i < half; ++i)
      b.bonafide.push_back(draw(bona_pool, n_bonafide, bona_cursor, bona_minor));
    for (std::size_t i = 0; i < half; ++i)
      b.spoof.push_back(draw(spoof_pool, n_spoof, spoof_cursor, spoof_minor));
  }
  return out;
}

}  // namespace antispoof
