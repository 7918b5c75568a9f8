#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lptgnn/optim.hpp"
#include "lptgnn/tape.hpp"
#include "lptgnn/tensor.hpp"

namespace lptgnn {

enum class WeightStructure { Dense, CP, Tucker, TT };

WeightStructure weight_structure_from_string(const std::string& s);
std::string to_string(WeightStructure s);

// A linear map from tensors shaped in_modes to tensors shaped out_modes,
// parameterized by a factored weight over the modes in_modes ++ out_modes.
// Rank layout: CP holds one shared rank {R}; Tucker one rank per weight
// mode; TT the internal carriage ranks r_1..r_{K-1}; Dense none.
struct LowRankSpec {
  WeightStructure structure = WeightStructure::Tucker;
  Shape in_modes;
  Shape out_modes;
  std::vector<std::int64_t> ranks;
};

// Half-rank defaults: Tucker ⌈D_m/2⌉ per mode, CP ⌈max D_m / 2⌉, TT
// ⌈max D_m / 2⌉ capped at the exact chain rank.
std::vector<std::int64_t> default_ranks(WeightStructure structure, const Shape& in_modes,
                                        const Shape& out_modes);
LowRankSpec make_lowrank(WeightStructure structure, Shape in_modes, Shape out_modes);

// Factor parameter suffixes with shapes, in the order lowrank_contract and
// lowrank_materialize consume them.
std::vector<std::pair<std::string, Shape>> lowrank_param_shapes(const LowRankSpec& spec);
std::vector<std::string> lowrank_param_suffixes(const LowRankSpec& spec);
// Number of scalars across all factors.
std::int64_t lowrank_param_count(const LowRankSpec& spec);

// Creates the factor parameters under `prefix` such that the materialized
// weight has entrywise variance ~ 2/(fan_in+fan_out).
void lowrank_init(ParamStore& store, const std::string& prefix, const LowRankSpec& spec,
                  SplitRng& rng);

// Contracts all in_modes of x (leading modes are batched) against the
// factored weight without materializing it; output is batch ++ out_modes.
Var lowrank_contract(Tape& tape, const LowRankSpec& spec, const std::vector<Var>& factors,
                     Var x);

// Full weight tensor shaped in_modes ++ out_modes, built by direct
// summation. Test and inspection aid; never on the training path.
Tensor lowrank_materialize(const LowRankSpec& spec, const std::vector<Tensor>& factors);

// L activated layers followed by one unactivated linear layer; consecutive
// layer shapes must chain.
struct TTLSpec {
  std::vector<LowRankSpec> layers;
  int hidden_count() const { return static_cast<int>(layers.size()) - 1; }
};

TTLSpec make_ttl(Shape in_modes, Shape out_modes, int hidden_layers, WeightStructure structure);

void ttl_init(ParamStore& store, const std::string& prefix, const TTLSpec& spec, SplitRng& rng);
// Layer i reads parameters at `prefix + ".l" + i`; biases at ".bias".
Var ttl_forward(Tape& tape, const BoundParams& params, const std::string& prefix,
                const TTLSpec& spec, Var x);

}  // namespace lptgnn
