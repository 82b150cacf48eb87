#pragma once

#include <string>
#include <vector>

#include "ecomedit/model.hpp"

namespace testutil {

inline const std::vector<std::string>& small_corpus() {
    static const std::vector<std::string> c = {
        "The laptop has a fast processor and a bright screen.", "This pan is nonstick and oven safe.",
        "The tent keeps campers dry in the rain.",             "The gloves protect hands in the lab.",
        "People buy a kettle in order to boil water quickly.", "The jeans have a regular fit and a zip fly.",
        "A drill makes holes in metal and wood.",              "The speaker delivers deep bass and clear sound."};
    return c;
}

// Untrained four-head toy small enough for exhaustive checks.
inline ecomedit::ToyTransformer small_model(int layers = 4, std::uint64_t seed = 21) {
    ecomedit::ToyConfig c;
    c.hidden_dim = 32;
    c.num_layers = layers;
    c.num_heads = 4;
    c.mlp_dim = 64;
    c.max_positions = 64;
    c.seed = seed;
    return ecomedit::ToyTransformer(ecomedit::Tokenizer::build(small_corpus(), 120), c);
}

}  // namespace testutil
