#pragma once

#include <cstdint>
#include <vector>

#include "btpredict/learning.hpp"
#include "btpredict/techtree.hpp"

namespace btp {

// P(BuildTree | T = t, observations, coherence), restricted to the model
// domain. Entries carry strictly positive probabilities summing to 1, sorted
// by descending probability with ties broken by canonical tree order; every
// entry contains the observation multiset.
struct Posterior {
  struct Item {
    BuildTree tree;
    double probability;
  };
  std::vector<Item> entries;
  std::uint32_t query_time_s = 0;
  ObservationVector observation;
  std::size_t compatible_count = 0;  // trees that passed the coherence filter
};

// weight(bt) = P(t | bt) * P(bt) * [bt covers obs], normalized over the
// model domain; computed in log space so extreme tails cannot degenerate
// the normalization. Throws NoCompatibleTreeError when the filter removes
// every tree, and Error when t is outside the horizon.
Posterior posterior(const Model& model, std::uint32_t t_s, const ObservationVector& obs);

// The argmax tree (first under the posterior sort order).
const BuildTree& most_probable(const Posterior& p);

// Posterior-weighted distance to a reference tree: sum P(bt) * d(bt, real).
double expected_distance(const Posterior& p, const BuildTree& real);

// most_probable(posterior(...)): the k=0 reconstruction query.
BuildTree reconstruct(const Model& model, std::uint32_t t_s, const ObservationVector& obs);

}  // namespace btp
