#include "lptgnn/lowrank.hpp"

#include <algorithm>
#include <cmath>

#include "lptgnn/errors.hpp"

namespace lptgnn {

namespace {

Shape weight_modes(const LowRankSpec& spec) {
  Shape modes = spec.in_modes;
  modes.insert(modes.end(), spec.out_modes.begin(), spec.out_modes.end());
  return modes;
}

void validate_spec(const LowRankSpec& spec) {
  if (spec.in_modes.empty() || spec.out_modes.empty())
    throw ShapeError("low-rank spec needs nonempty input and output modes");
  shape_numel(spec.in_modes);
  shape_numel(spec.out_modes);
  std::size_t k = weight_modes(spec).size();
  std::size_t expect = 0;
  switch (spec.structure) {
    case WeightStructure::Dense: expect = 0; break;
    case WeightStructure::CP: expect = 1; break;
    case WeightStructure::Tucker: expect = k; break;
    case WeightStructure::TT: expect = k - 1; break;
  }
  if (spec.ranks.size() != expect)
    throw ShapeError("rank list size " + std::to_string(spec.ranks.size()) + " invalid for " +
                     to_string(spec.structure) + " over " + std::to_string(k) + " modes");
  for (std::int64_t r : spec.ranks)
    if (r <= 0) throw ShapeError("ranks must be positive");
}

// Moves `axis` of x to the end, then right-multiplies by mat (d, e);
// result keeps the remaining axes in order and appends extent e.
Var contract_axis(Tape& tape, Var x, int axis, Var mat) {
  const Shape& xs = tape.value(x).shape();
  int r = static_cast<int>(xs.size());
  std::vector<int> perm;
  perm.reserve(static_cast<std::size_t>(r));
  Shape rest;
  for (int i = 0; i < r; ++i)
    if (i != axis) {
      perm.push_back(i);
      rest.push_back(xs[static_cast<std::size_t>(i)]);
    }
  perm.push_back(axis);
  std::int64_t d = xs[static_cast<std::size_t>(axis)];
  Var moved = tape.permute(x, perm);
  Var flat = tape.reshape(moved, Shape{shape_numel(rest), d});
  Var prod = tape.matmul(flat, mat);
  Shape out = rest;
  out.push_back(tape.value(mat).dim(1));
  return tape.reshape(prod, out);
}

}  // namespace

WeightStructure weight_structure_from_string(const std::string& s) {
  if (s == "dense") return WeightStructure::Dense;
  if (s == "cp") return WeightStructure::CP;
  if (s == "tucker") return WeightStructure::Tucker;
  if (s == "tt") return WeightStructure::TT;
  throw ConfigError("unknown weight structure: " + s + " (expected dense|cp|tucker|tt)");
}

std::string to_string(WeightStructure s) {
  switch (s) {
    case WeightStructure::Dense: return "dense";
    case WeightStructure::CP: return "cp";
    case WeightStructure::Tucker: return "tucker";
    case WeightStructure::TT: return "tt";
  }
  return "?";
}

std::vector<std::int64_t> default_ranks(WeightStructure structure, const Shape& in_modes,
                                        const Shape& out_modes) {
  Shape modes = in_modes;
  modes.insert(modes.end(), out_modes.begin(), out_modes.end());
  std::int64_t max_mode = 1;
  for (std::int64_t d : modes) max_mode = std::max(max_mode, d);
  std::int64_t half = (max_mode + 1) / 2;
  switch (structure) {
    case WeightStructure::Dense:
      return {};
    case WeightStructure::CP:
      return {half};
    case WeightStructure::Tucker: {
      std::vector<std::int64_t> r;
      r.reserve(modes.size());
      for (std::int64_t d : modes) r.push_back((d + 1) / 2);
      return r;
    }
    case WeightStructure::TT: {
      std::vector<std::int64_t> r;
      for (std::size_t k = 1; k < modes.size(); ++k) {
        std::int64_t left = 1, right = 1;
        for (std::size_t i = 0; i < k; ++i) left *= modes[i];
        for (std::size_t i = k; i < modes.size(); ++i) right *= modes[i];
        r.push_back(std::min(half, std::min(left, right)));
      }
      return r;
    }
  }
  return {};
}

LowRankSpec make_lowrank(WeightStructure structure, Shape in_modes, Shape out_modes) {
  LowRankSpec spec;
  spec.structure = structure;
  spec.ranks = default_ranks(structure, in_modes, out_modes);
  spec.in_modes = std::move(in_modes);
  spec.out_modes = std::move(out_modes);
  validate_spec(spec);
  return spec;
}

std::vector<std::pair<std::string, Shape>> lowrank_param_shapes(const LowRankSpec& spec) {
  validate_spec(spec);
  Shape modes = weight_modes(spec);
  std::vector<std::pair<std::string, Shape>> out;
  switch (spec.structure) {
    case WeightStructure::Dense:
      out.emplace_back("w", modes);
      break;
    case WeightStructure::CP: {
      std::int64_t r = spec.ranks[0];
      out.emplace_back("lambda", Shape{r});
      for (std::size_t m = 0; m < modes.size(); ++m)
        out.emplace_back("f" + std::to_string(m), Shape{modes[m], r});
      break;
    }
    case WeightStructure::Tucker: {
      out.emplace_back("core", Shape(spec.ranks.begin(), spec.ranks.end()));
      for (std::size_t m = 0; m < modes.size(); ++m)
        out.emplace_back("u" + std::to_string(m), Shape{modes[m], spec.ranks[m]});
      break;
    }
    case WeightStructure::TT: {
      for (std::size_t m = 0; m < modes.size(); ++m) {
        std::int64_t left = m == 0 ? 1 : spec.ranks[m - 1];
        std::int64_t right = m + 1 == modes.size() ? 1 : spec.ranks[m];
        out.emplace_back("g" + std::to_string(m), Shape{left, modes[m], right});
      }
      break;
    }
  }
  return out;
}

std::vector<std::string> lowrank_param_suffixes(const LowRankSpec& spec) {
  std::vector<std::string> out;
  for (const auto& [name, shape] : lowrank_param_shapes(spec)) out.push_back("." + name);
  return out;
}

std::int64_t lowrank_param_count(const LowRankSpec& spec) {
  std::int64_t total = 0;
  for (const auto& [name, shape] : lowrank_param_shapes(spec)) total += shape_numel(shape);
  return total;
}

void lowrank_init(ParamStore& store, const std::string& prefix, const LowRankSpec& spec,
                  SplitRng& rng) {
  auto shapes = lowrank_param_shapes(spec);
  std::int64_t fan_in = shape_numel(spec.in_modes);
  std::int64_t fan_out = shape_numel(spec.out_modes);
  double target_std = glorot_std(fan_in, fan_out);
  double target_var = target_std * target_std;
  std::size_t k = weight_modes(spec).size();
  switch (spec.structure) {
    case WeightStructure::Dense:
      store.create(prefix + ".w", normal_tensor(shapes[0].second, target_std, rng));
      break;
    case WeightStructure::CP: {
      // W = Σ_r λ_r ⊗_m f_m[:,r]; with λ = 1 each factor takes an even
      // share of the variance budget.
      double factor_std =
          std::pow(target_var / static_cast<double>(spec.ranks[0]), 1.0 / (2.0 * static_cast<double>(k)));
      store.create(prefix + ".lambda", Tensor::full(shapes[0].second, 1.0));
      for (std::size_t i = 1; i < shapes.size(); ++i)
        store.create(prefix + "." + shapes[i].first, normal_tensor(shapes[i].second, factor_std, rng));
      break;
    }
    case WeightStructure::Tucker: {
      // Loadings at std 1/sqrt(R_m) keep the mode products variance-neutral,
      // leaving the core to carry the target scale.
      store.create(prefix + ".core", normal_tensor(shapes[0].second, target_std, rng));
      for (std::size_t i = 1; i < shapes.size(); ++i) {
        double u_std = 1.0 / std::sqrt(static_cast<double>(spec.ranks[i - 1]));
        store.create(prefix + "." + shapes[i].first, normal_tensor(shapes[i].second, u_std, rng));
      }
      break;
    }
    case WeightStructure::TT: {
      double rank_prod = 1.0;
      for (std::int64_t r : spec.ranks) rank_prod *= static_cast<double>(r);
      double carriage_std = std::pow(target_var / rank_prod, 1.0 / (2.0 * static_cast<double>(k)));
      for (const auto& [name, shape] : shapes)
        store.create(prefix + "." + name, normal_tensor(shape, carriage_std, rng));
      break;
    }
  }
}

Var lowrank_contract(Tape& tape, const LowRankSpec& spec, const std::vector<Var>& factors,
                     Var x) {
  validate_spec(spec);
  auto shapes = lowrank_param_shapes(spec);
  if (factors.size() != shapes.size())
    throw ShapeError("expected " + std::to_string(shapes.size()) + " factors, got " +
                     std::to_string(factors.size()));
  for (std::size_t i = 0; i < factors.size(); ++i)
    if (tape.value(factors[i]).shape() != shapes[i].second)
      throw ShapeError("factor " + shapes[i].first + " has shape " +
                       shape_str(tape.value(factors[i]).shape()) + ", expected " +
                       shape_str(shapes[i].second));

  const Shape& xs = tape.value(x).shape();
  std::size_t m_in = spec.in_modes.size();
  if (xs.size() < m_in ||
      !std::equal(spec.in_modes.begin(), spec.in_modes.end(), xs.end() - static_cast<long>(m_in)))
    throw ShapeError("input trailing modes of " + shape_str(xs) + " do not match " +
                     shape_str(spec.in_modes));
  Shape batch(xs.begin(), xs.end() - static_cast<long>(m_in));
  std::int64_t b = shape_numel(batch);

  Shape flat_in{b};
  flat_in.insert(flat_in.end(), spec.in_modes.begin(), spec.in_modes.end());
  Var cur = tape.reshape(x, flat_in);

  std::size_t p_out = spec.out_modes.size();
  switch (spec.structure) {
    case WeightStructure::Dense: {
      Var w2 = tape.reshape(factors[0],
                            Shape{shape_numel(spec.in_modes), shape_numel(spec.out_modes)});
      cur = tape.matmul(tape.reshape(cur, Shape{b, shape_numel(spec.in_modes)}), w2);
      break;
    }
    case WeightStructure::Tucker: {
      // Input-mode products, then the core as one matrix, then output-mode
      // expansions; each contract_axis appends the new mode at the end so
      // rank modes stay ordered.
      for (std::size_t m = 0; m < m_in; ++m) cur = contract_axis(tape, cur, 1, factors[1 + m]);
      std::int64_t rin = 1, rout = 1;
      for (std::size_t i = 0; i < m_in; ++i) rin *= spec.ranks[i];
      for (std::size_t i = m_in; i < spec.ranks.size(); ++i) rout *= spec.ranks[i];
      cur = tape.matmul(tape.reshape(cur, Shape{b, rin}),
                        tape.reshape(factors[0], Shape{rin, rout}));
      Shape srank{b};
      srank.insert(srank.end(), spec.ranks.begin() + static_cast<long>(m_in), spec.ranks.end());
      cur = tape.reshape(cur, srank);
      for (std::size_t p = 0; p < p_out; ++p) {
        Var ut = tape.permute(factors[1 + m_in + p], {1, 0});
        cur = contract_axis(tape, cur, 1, ut);
      }
      break;
    }
    case WeightStructure::CP: {
      std::int64_t r = spec.ranks[0];
      cur = contract_axis(tape, cur, 1, factors[1]);
      for (std::size_t m = 1; m < m_in; ++m) {
        // cur: (b, D_m..D_{M-1}, r). Broadcast the factor over the trailing
        // uncontracted modes, multiply, and sum out D_m.
        Shape fshape{spec.in_modes[m]};
        fshape.insert(fshape.end(), m_in - m - 1, 1);
        fshape.push_back(r);
        Var f = tape.reshape(factors[1 + m], fshape);
        cur = tape.sum_axis(tape.mul(cur, f), 1);
      }
      cur = tape.mul(cur, factors[0]);
      for (std::size_t p = 0; p < p_out; ++p) {
        Shape cs = tape.value(cur).shape();
        cs.insert(cs.end() - 1, 1);
        cur = tape.mul(tape.reshape(cur, cs), factors[1 + m_in + p]);
      }
      cur = tape.sum_axis(cur, static_cast<int>(tape.value(cur).rank()) - 1);
      break;
    }
    case WeightStructure::TT: {
      Shape modes = weight_modes(spec);
      {
        Var g0 = tape.reshape(factors[0], Shape{modes[0], factors.size() == 1
                                                              ? 1
                                                              : spec.ranks[0]});
        cur = contract_axis(tape, cur, 1, g0);
      }
      for (std::size_t m = 1; m < m_in; ++m) {
        // cur: (b, D_m..D_{M-1}, r_m). Pair (D_m, r_m) and contract both
        // against the carriage at once.
        int rank = tape.value(cur).rank();
        std::vector<int> perm;
        perm.push_back(0);
        for (int i = 2; i < rank - 1; ++i) perm.push_back(i);
        perm.push_back(1);
        perm.push_back(rank - 1);
        cur = tape.permute(cur, perm);
        Shape cs = tape.value(cur).shape();
        std::int64_t dm = modes[m], rl = spec.ranks[m - 1];
        std::int64_t rr = (m + 1 == modes.size()) ? 1 : spec.ranks[m];
        Shape rest(cs.begin(), cs.end() - 2);
        cur = tape.reshape(cur, Shape{shape_numel(rest), dm * rl});
        Var g = tape.reshape(tape.permute(factors[m], {1, 0, 2}), Shape{dm * rl, rr});
        cur = tape.matmul(cur, g);
        rest.push_back(rr);
        cur = tape.reshape(cur, rest);
      }
      for (std::size_t p = 0; p < p_out; ++p) {
        std::size_t k = m_in + p;
        std::int64_t rl = (k == 0) ? 1 : spec.ranks[k - 1];
        std::int64_t rr = (k + 1 == modes.size()) ? 1 : spec.ranks[k];
        Shape cs = tape.value(cur).shape();
        Shape rest(cs.begin(), cs.end() - 1);
        cur = tape.reshape(cur, Shape{shape_numel(rest), rl});
        cur = tape.matmul(cur, tape.reshape(factors[k], Shape{rl, modes[k] * rr}));
        rest.push_back(modes[k]);
        rest.push_back(rr);
        cur = tape.reshape(cur, rest);
      }
      Shape cs = tape.value(cur).shape();
      cur = tape.reshape(cur, Shape(cs.begin(), cs.end() - 1));
      break;
    }
  }

  Shape final_shape = batch;
  final_shape.insert(final_shape.end(), spec.out_modes.begin(), spec.out_modes.end());
  return tape.reshape(cur, final_shape);
}

Tensor lowrank_materialize(const LowRankSpec& spec, const std::vector<Tensor>& factors) {
  validate_spec(spec);
  auto shapes = lowrank_param_shapes(spec);
  if (factors.size() != shapes.size())
    throw ShapeError("expected " + std::to_string(shapes.size()) + " factors, got " +
                     std::to_string(factors.size()));
  for (std::size_t i = 0; i < factors.size(); ++i)
    if (factors[i].shape() != shapes[i].second)
      throw ShapeError("factor " + shapes[i].first + " has shape " + shape_str(factors[i].shape()) +
                       ", expected " + shape_str(shapes[i].second));

  Shape modes = weight_modes(spec);
  std::size_t k = modes.size();
  Tensor w(modes);
  std::vector<std::int64_t> idx(k, 0);
  std::int64_t flat = 0;

  switch (spec.structure) {
    case WeightStructure::Dense:
      return factors[0];
    case WeightStructure::CP: {
      const Tensor& lambda = factors[0];
      std::int64_t r = spec.ranks[0];
      do {
        double sum = 0.0;
        for (std::int64_t ri = 0; ri < r; ++ri) {
          double term = lambda[ri];
          for (std::size_t m = 0; m < k; ++m) term *= factors[1 + m][idx[m] * r + ri];
          sum += term;
        }
        w[flat++] = sum;
      } while (advance_index(idx, modes));
      return w;
    }
    case WeightStructure::Tucker: {
      const Tensor& core = factors[0];
      Shape rshape(spec.ranks.begin(), spec.ranks.end());
      do {
        double sum = 0.0;
        std::vector<std::int64_t> ridx(k, 0);
        std::int64_t rflat = 0;
        do {
          double term = core[rflat++];
          for (std::size_t m = 0; m < k; ++m)
            term *= factors[1 + m][idx[m] * spec.ranks[m] + ridx[m]];
          sum += term;
        } while (advance_index(ridx, rshape));
        w[flat++] = sum;
      } while (advance_index(idx, modes));
      return w;
    }
    case WeightStructure::TT: {
      do {
        std::vector<double> chain{1.0};
        for (std::size_t m = 0; m < k; ++m) {
          std::int64_t rl = (m == 0) ? 1 : spec.ranks[m - 1];
          std::int64_t rr = (m + 1 == k) ? 1 : spec.ranks[m];
          std::vector<double> next(static_cast<std::size_t>(rr), 0.0);
          for (std::int64_t b = 0; b < rr; ++b)
            for (std::int64_t a = 0; a < rl; ++a)
              next[static_cast<std::size_t>(b)] +=
                  chain[static_cast<std::size_t>(a)] * factors[m][(a * modes[m] + idx[m]) * rr + b];
          chain = std::move(next);
        }
        w[flat++] = chain[0];
      } while (advance_index(idx, modes));
      return w;
    }
  }
  return w;
}

TTLSpec make_ttl(Shape in_modes, Shape out_modes, int hidden_layers, WeightStructure structure) {
  if (hidden_layers < 1) throw ConfigError("ttl needs at least one activated layer");
  TTLSpec spec;
  for (int i = 0; i < hidden_layers; ++i)
    spec.layers.push_back(make_lowrank(structure, in_modes, in_modes));
  spec.layers.push_back(make_lowrank(structure, in_modes, std::move(out_modes)));
  return spec;
}

void ttl_init(ParamStore& store, const std::string& prefix, const TTLSpec& spec, SplitRng& rng) {
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    std::string lp = prefix + ".l" + std::to_string(i);
    lowrank_init(store, lp, spec.layers[i], rng);
    store.create(lp + ".bias", Tensor::zeros(spec.layers[i].out_modes));
  }
}

Var ttl_forward(Tape& tape, const BoundParams& params, const std::string& prefix,
                const TTLSpec& spec, Var x) {
  Var cur = x;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LowRankSpec& layer = spec.layers[i];
    const Shape& cs = tape.value(cur).shape();
    std::size_t m = layer.in_modes.size();
    if (cs.size() < m ||
        !std::equal(layer.in_modes.begin(), layer.in_modes.end(), cs.end() - static_cast<long>(m)))
      throw ShapeError("ttl layer " + std::to_string(i) + ": input " + shape_str(cs) +
                       " does not chain with modes " + shape_str(layer.in_modes));
    std::string lp = prefix + ".l" + std::to_string(i);
    std::vector<Var> factors = params.collect(lp, lowrank_param_suffixes(layer));
    cur = lowrank_contract(tape, layer, factors, cur);
    cur = tape.add_bias(cur, params[lp + ".bias"]);
    if (i + 1 < spec.layers.size()) cur = tape.relu(cur);
  }
  return cur;
}

}  // namespace lptgnn
