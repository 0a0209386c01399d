#include "checks.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

#include "omnilab/decoder/decoder.hpp"
#include "omnilab/flow/flow.hpp"
#include "omnilab/numcore/ops.hpp"
#include "omnilab/pairminer/pairminer.hpp"
#include "omnilab/pairminer/synthetic.hpp"
#include "omnilab/rope/rope.hpp"
#include "omnilab/toybench/toybench.hpp"

namespace omnilab::checks {

namespace {

DTensor random_tensor(num::Shape shape, num::SeededStream& rng, double stddev = 1.0) {
  DTensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.normal(0.0, stddev);
  return t;
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double weighted_loss(num::BasicParameterSet<double>& ps, const Probe& f, const DTensor* weights,
                     DTensor* out_value, bool with_grad) {
  DGraph g;
  g.set_grad_enabled(with_grad);
  std::vector<DVar> leaves;
  for (std::size_t i = 0; i < ps.size(); ++i) leaves.push_back(g.param(ps[i]));
  DVar y = f(g, leaves);
  if (out_value) *out_value = y.value();
  if (!weights) return 0.0;
  DVar loss = num::sum(y * g.constant(*weights));
  if (with_grad) {
    ps.zero_grad();
    g.backward(loss);
  }
  return loss.value()[0];
}

int rand_int(num::SeededStream& rng, int lo, int hi) {
  return static_cast<int>(rng.uniform_int(lo, hi));
}

}  // namespace

double fd_relative_error(std::vector<DTensor> inputs, const Probe& f, num::SeededStream& rng,
                         double h) {
  num::BasicParameterSet<double> ps;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    ps.add("in" + std::to_string(i), std::move(inputs[i]));
  }
  DTensor y;
  weighted_loss(ps, f, nullptr, &y, false);
  const DTensor weights = random_tensor(y.shape(), rng);
  weighted_loss(ps, f, &weights, nullptr, true);

  double worst = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    auto& p = ps[i];
    const DTensor analytic = p.grad;
    std::vector<double> numeric(static_cast<std::size_t>(p.value.size()));
    for (std::int64_t j = 0; j < p.value.size(); ++j) {
      const double x = p.value[j];
      p.value[j] = x + h;
      const double up = weighted_loss(ps, f, &weights, nullptr, false);
      p.value[j] = x - h;
      const double down = weighted_loss(ps, f, &weights, nullptr, false);
      p.value[j] = x;
      numeric[static_cast<std::size_t>(j)] = (up - down) / (2.0 * h);
    }
    double diff = 0.0;
    for (std::size_t j = 0; j < numeric.size(); ++j) {
      diff = std::max(diff, std::abs(analytic[std::int64_t(j)] - numeric[j]));
    }
    const double scale = max_abs(numeric);
    worst = std::max(worst, scale > 0.0 ? diff / scale : diff);
  }
  return worst;
}

std::vector<GradResult> op_gradient_suite(int instances, std::uint64_t seed) {
  using Shape = num::Shape;
  struct Case {
    std::string name;
    std::function<std::pair<std::vector<DTensor>, Probe>(num::SeededStream&)> make;
  };
  std::vector<Case> cases;
  auto unary = [&](std::string name, std::function<DVar(DVar)> op) {
    cases.push_back({std::move(name), [op](num::SeededStream& r) {
                       const Shape s{rand_int(r, 1, 4), rand_int(r, 2, 6)};
                       return std::pair{std::vector{random_tensor(s, r)},
                                        Probe([op](DGraph&, std::span<const DVar> v) {
                                          return op(v[0]);
                                        })};
                     }});
  };
  auto binary_same = [&](std::string name, std::function<DVar(DVar, DVar)> op) {
    cases.push_back({std::move(name), [op](num::SeededStream& r) {
                       const Shape s{rand_int(r, 1, 4), rand_int(r, 2, 5)};
                       return std::pair{std::vector{random_tensor(s, r), random_tensor(s, r)},
                                        Probe([op](DGraph&, std::span<const DVar> v) {
                                          return op(v[0], v[1]);
                                        })};
                     }});
  };

  binary_same("add", [](DVar a, DVar b) { return a + b; });
  binary_same("sub", [](DVar a, DVar b) { return a - b; });
  binary_same("mul", [](DVar a, DVar b) { return a * b; });
  cases.push_back({"mul_broadcast", [](num::SeededStream& r) {
                     const std::int64_t n = rand_int(r, 2, 5);
                     return std::pair{
                         std::vector{random_tensor({rand_int(r, 1, 3), rand_int(r, 1, 3), n}, r),
                                     random_tensor({n}, r)},
                         Probe([](DGraph&, std::span<const DVar> v) { return v[0] * v[1]; })};
                   }});
  cases.push_back({"add_broadcast", [](num::SeededStream& r) {
                     const std::int64_t n = rand_int(r, 2, 5);
                     return std::pair{
                         std::vector{random_tensor({rand_int(r, 1, 4), n}, r),
                                     random_tensor({n}, r)},
                         Probe([](DGraph&, std::span<const DVar> v) { return v[0] + v[1]; })};
                   }});
  unary("scale", [](DVar a) { return num::scale(a, -1.7); });
  cases.push_back({"matmul", [](num::SeededStream& r) {
                     const int m = rand_int(r, 1, 4), k = rand_int(r, 1, 5), n = rand_int(r, 1, 4);
                     return std::pair{
                         std::vector{random_tensor({rand_int(r, 1, 2), m, k}, r),
                                     random_tensor({k, n}, r)},
                         Probe([](DGraph&, std::span<const DVar> v) {
                           return num::matmul(v[0], v[1]);
                         })};
                   }});
  cases.push_back({"matmul_batched", [](num::SeededStream& r) {
                     const int b = rand_int(r, 1, 3), m = rand_int(r, 1, 4), k = rand_int(r, 1, 4),
                               n = rand_int(r, 1, 4);
                     return std::pair{std::vector{random_tensor({b, m, k}, r),
                                                  random_tensor({b, k, n}, r)},
                                      Probe([](DGraph&, std::span<const DVar> v) {
                                        return num::matmul(v[0], v[1]);
                                      })};
                   }});
  cases.push_back({"matmul_nt", [](num::SeededStream& r) {
                     const int b = rand_int(r, 1, 3), m = rand_int(r, 1, 4), k = rand_int(r, 1, 4),
                               n = rand_int(r, 1, 4);
                     return std::pair{std::vector{random_tensor({b, m, k}, r),
                                                  random_tensor({b, n, k}, r)},
                                      Probe([](DGraph&, std::span<const DVar> v) {
                                        return num::matmul(v[0], v[1], true);
                                      })};
                   }});
  cases.push_back({"reshape", [](num::SeededStream& r) {
                     const int a = rand_int(r, 1, 3), b = rand_int(r, 1, 3), c = rand_int(r, 1, 3);
                     return std::pair{std::vector{random_tensor({a, b * c}, r)},
                                      Probe([=](DGraph&, std::span<const DVar> v) {
                                        return num::reshape(v[0], {b, a, c});
                                      })};
                   }});
  cases.push_back({"permute", [](num::SeededStream& r) {
                     std::vector<int> perm{0, 1, 2, 3};
                     for (int i = 3; i > 0; --i) std::swap(perm[std::size_t(i)], perm[std::size_t(rand_int(r, 0, i))]);
                     const Shape s{rand_int(r, 1, 3), rand_int(r, 1, 3), rand_int(r, 1, 3),
                                   rand_int(r, 1, 3)};
                     return std::pair{std::vector{random_tensor(s, r)},
                                      Probe([perm](DGraph&, std::span<const DVar> v) {
                                        return num::permute(v[0], perm);
                                      })};
                   }});
  unary("transpose", [](DVar a) { return num::transpose(a); });
  unary("softmax", [](DVar a) { return num::softmax(a); });
  unary("rms_norm", [](DVar a) { return num::rms_norm(a); });
  unary("silu", [](DVar a) { return num::silu(a); });
  unary("gelu", [](DVar a) { return num::gelu(a); });
  binary_same("mse", [](DVar a, DVar b) { return num::mse(a, b); });
  unary("sum", [](DVar a) { return num::sum(a); });
  cases.push_back({"embedding", [](num::SeededStream& r) {
                     const int rows = rand_int(r, 2, 5);
                     std::vector<std::int64_t> idx(std::size_t(rand_int(r, 1, 6)));
                     for (auto& i : idx) i = rand_int(r, 0, rows - 1);
                     return std::pair{std::vector{random_tensor({rows, rand_int(r, 1, 4)}, r)},
                                      Probe([idx](DGraph&, std::span<const DVar> v) {
                                        return num::embedding(v[0], idx);
                                      })};
                   }});
  cases.push_back({"concat_rows", [](num::SeededStream& r) {
                     const int d = rand_int(r, 1, 4);
                     return std::pair{std::vector{random_tensor({rand_int(r, 1, 3), d}, r),
                                                  random_tensor({rand_int(r, 1, 3), d}, r),
                                                  random_tensor({rand_int(r, 1, 3), d}, r)},
                                      Probe([](DGraph&, std::span<const DVar> v) {
                                        return num::concat_rows(
                                            std::vector<DVar>(v.begin(), v.end()));
                                      })};
                   }});
  cases.push_back({"slice_rows", [](num::SeededStream& r) {
                     const int rows = rand_int(r, 2, 6);
                     const int b = rand_int(r, 0, rows - 1), e = rand_int(r, b + 1, rows);
                     return std::pair{std::vector{random_tensor({rows, rand_int(r, 1, 4)}, r)},
                                      Probe([=](DGraph&, std::span<const DVar> v) {
                                        return num::slice_rows(v[0], b, e);
                                      })};
                   }});
  cases.push_back({"rotate_pairs", [](num::SeededStream& r) {
                     const int tokens = rand_int(r, 1, 4), half = rand_int(r, 1, 3);
                     auto c = std::make_shared<DTensor>(Shape{tokens, half});
                     auto s = std::make_shared<DTensor>(Shape{tokens, half});
                     for (std::int64_t i = 0; i < c->size(); ++i) {
                       const double a = r.uniform(-10.0, 10.0);
                       (*c)[i] = std::cos(a);
                       (*s)[i] = std::sin(a);
                     }
                     std::shared_ptr<const DTensor> cc = c, sc = s;
                     return std::pair{
                         std::vector{random_tensor({rand_int(r, 1, 2), tokens, 2 * half}, r)},
                         Probe([cc, sc](DGraph&, std::span<const DVar> v) {
                           return num::rotate_pairs(v[0], cc, sc);
                         })};
                   }});
  cases.push_back({"image_index_embedding", [](num::SeededStream& r) {
                     const rope::Layout layout{rope::Segment::text(rand_int(r, 1, 3)),
                                               rope::Segment::image(1, 1, rand_int(r, 1, 2)),
                                               rope::Segment::image(2, rand_int(r, 1, 2), 2)};
                     const int d = rand_int(r, 1, 4);
                     rope::SchemeConfig sc;
                     sc.use_image_index_embedding = true;
                     return std::pair{std::vector{random_tensor({rope::token_count(layout), d}, r),
                                                  random_tensor({4, d}, r)},
                                      Probe([layout, sc](DGraph&, std::span<const DVar> v) {
                                        return rope::image_index_embedding(v[0], layout, v[1],
                                                                           sc);
                                      })};
                   }});
  cases.push_back({"softmax_mse", [](num::SeededStream& r) {
                     return std::pair{std::vector{random_tensor({4}, r), random_tensor({4}, r)},
                                      Probe([](DGraph&, std::span<const DVar> v) {
                                        return num::mse(num::softmax(v[0]), v[1]);
                                      })};
                   }});
  cases.push_back({"mlp2", [](num::SeededStream& r) {
                     return std::pair{
                         std::vector{random_tensor({8, 8}, r), random_tensor({8, 8}, r, 0.35),
                                     random_tensor({8}, r, 0.1), random_tensor({8, 8}, r, 0.35),
                                     random_tensor({8}, r, 0.1)},
                         Probe([](DGraph&, std::span<const DVar> v) {
                           auto h = num::silu(num::matmul(v[0], v[1]) + v[2]);
                           return num::matmul(h, v[3]) + v[4];
                         })};
                   }});

  std::vector<GradResult> out;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    num::SeededStream rng(num::derive_seed(seed, c));
    GradResult res{cases[c].name, instances, 0.0};
    for (int i = 0; i < instances; ++i) {
      auto [inputs, probe] = cases[c].make(rng);
      res.max_rel_error =
          std::max(res.max_rel_error, fd_relative_error(std::move(inputs), probe, rng));
    }
    out.push_back(std::move(res));
  }
  return out;
}

GradResult model_gradient_suite(int instances, std::uint64_t seed, int samples_per_tensor) {
  GradResult res{"decoder", instances, 0.0};
  for (int inst = 0; inst < instances; ++inst) {
    num::SeededStream rng(num::derive_seed(seed, std::uint64_t(inst)));
    decoder::ModelConfig mc;
    mc.dim = 16;
    mc.heads = 2;
    mc.layers = 2;
    mc.image_height = 4;
    mc.image_width = 4;
    mc.time_frequencies = 4;
    mc.rope.scheme = static_cast<rope::Scheme>(inst % 3);
    mc.rope.use_image_index_embedding = (inst / 3) % 2 == 1;
    mc.timestep_conditioning = inst % 2 == 1;
    mc.activation = inst % 4 == 3 ? decoder::Activation::gelu : decoder::Activation::silu;
    decoder::BasicModel<double> model(mc, rng.next_u64());
    for (std::size_t i = 0; i < model.params().size(); ++i) {
      for (auto& v : model.params()[i].value.data()) v += rng.normal(0.0, 0.2);
    }

    toybench::ExperimentConfig ec;
    ec.model = mc;
    ec.min_images = 1;
    ec.max_images = 3;
    struct Example {
      std::vector<DTensor> inputs;
      int k;
      DTensor target;
      DTensor x_t;
      double t;
    };
    std::vector<Example> batch;
    for (int b = 0; b < 2; ++b) {
      auto ex = toybench::gen_toy_example(ec, rng);
      Example e;
      for (const auto& img : ex.inputs) e.inputs.push_back(img.cast<double>());
      e.k = ex.k;
      e.target = ex.target.cast<double>();
      e.t = 0.0;
      if (mc.timestep_conditioning) {
        auto fe = flow::make_training_example(ex.target, rng);
        e.x_t = fe.x_t.cast<double>();
        e.target = fe.v_target.cast<double>();
        e.t = fe.t;
      }
      batch.push_back(std::move(e));
    }

    auto loss_of = [&](bool with_grad) {
      DGraph g;
      g.set_grad_enabled(with_grad);
      auto m = decoder::bind(g, model);
      std::vector<DVar> losses;
      for (const auto& e : batch) {
        auto cond = decoder::encode_instruction(m, e.k);
        decoder::OutputSpec<double> spec;
        std::optional<double> t;
        if (mc.timestep_conditioning) {
          spec.noisy_latent = e.x_t;
          t = e.t;
        }
        auto seq = decoder::assemble_sequence<double>(m, cond, e.inputs, spec);
        auto pred = decoder::forward(m, seq, t);
        losses.push_back(num::mse(pred, g.constant(decoder::patchify(e.target, mc.patch))));
      }
      auto total = num::scale(num::sum(num::concat_rows(losses)), 0.5);
      if (with_grad) {
        model.params().zero_grad();
        g.backward(total);
      }
      return total.value()[0];
    };

    loss_of(true);
    const double h = 1e-3;
    for (std::size_t i = 0; i < model.params().size(); ++i) {
      auto& p = model.params()[i];
      const DTensor analytic = p.grad;
      double diff = 0.0, scale = max_abs(analytic.data());
      for (int s = 0; s < samples_per_tensor; ++s) {
        const auto j = rng.uniform_int(0, p.value.size() - 1);
        const double x = p.value[j];
        p.value[j] = x + h;
        const double up = loss_of(false);
        p.value[j] = x - h;
        const double down = loss_of(false);
        p.value[j] = x;
        const double numeric = (up - down) / (2.0 * h);
        diff = std::max(diff, std::abs(numeric - analytic[j]));
        scale = std::max(scale, std::abs(numeric));
      }
      res.max_rel_error = std::max(res.max_rel_error, scale > 0.0 ? diff / scale : diff);
    }
  }
  return res;
}

RopeReport rope_property_suite(int cases, std::uint64_t seed) {
  RopeReport rep;
  rep.cases = cases;
  num::SeededStream rng(seed);
  const int head_dims[] = {8, 16, 32, 64};
  for (int c = 0; c < cases; ++c) {
    rope::SchemeConfig cfg;
    cfg.scheme = static_cast<rope::Scheme>(c % 3);
    const int hd = head_dims[c % 4];
    auto random_vec = [&](bool unit) {
      std::vector<float> v(static_cast<std::size_t>(hd));
      double n2 = 0.0;
      for (auto& x : v) {
        x = static_cast<float>(rng.normal());
        n2 += double(x) * x;
      }
      if (unit) {
        for (auto& x : v) x = static_cast<float>(x / std::sqrt(n2));
      }
      return v;
    };
    auto random_pos = [&](int range) {
      return rope::PosId3{rng.uniform_int(0, range), rng.uniform_int(0, range),
                          rng.uniform_int(0, range)};
    };
    auto rotated = [&](std::vector<float> v, const rope::PosId3& p) {
      const rope::PosId3 pos[] = {p};
      rope::apply_rotary(v, pos, hd, cfg);
      return v;
    };
    auto norm = [](std::span<const float> v) {
      double s = 0.0;
      for (float x : v) s += double(x) * x;
      return std::sqrt(s);
    };
    auto dot = [](std::span<const float> a, std::span<const float> b) {
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += double(a[i]) * b[i];
      return s;
    };

    // Zero position is the identity.
    const auto x = random_vec(false);
    if (rotated(x, {0, 0, 0}) != x) ++rep.identity_failures;

    // Rotations are orthogonal.
    const auto p = random_pos(1000);
    const double n0 = norm(x);
    rep.max_norm_error = std::max(rep.max_norm_error, std::abs(norm(rotated(x, p)) - n0) / n0);

    // Logits depend only on per-axis offsets.
    const auto q = random_vec(true), k = random_vec(true);
    const auto p1 = random_pos(200), p2 = random_pos(200);
    const double base = dot(rotated(q, p1), rotated(k, p2));
    for (std::int64_t shift : {1, 7, 100}) {
      for (int axis = 0; axis < 3; ++axis) {
        auto a = p1, b = p2;
        auto bump = [&](rope::PosId3& pp) {
          (axis == 0 ? pp.instance : axis == 1 ? pp.row : pp.col) += shift;
        };
        bump(a);
        bump(b);
        rep.max_translation_error = std::max(
            rep.max_translation_error, std::abs(dot(rotated(q, a), rotated(k, b)) - base));
      }
    }

    // Equal PosId3 at different sequence slots give the same operator, on
    // both the in-place and the differentiable path.
    {
      const auto pp = random_pos(50);
      const std::vector<rope::PosId3> pos{pp, random_pos(50), pp};
      const auto tables = rope::make_rotary_tables<float>(pos, hd, cfg);
      for (int e = 0; e < hd; ++e) {
        std::vector<float> probe(static_cast<std::size_t>(3 * hd), 0.0f);
        for (int t = 0; t < 3; ++t) probe[std::size_t(t * hd + e)] = 1.0f;
        num::Graph g;
        auto via_graph = rope::apply_rotary(
            g.constant(num::Tensor({3, hd}, std::vector<float>(probe.begin(), probe.end()))),
            tables);
        rope::apply_rotary(probe, pos, hd, cfg);
        const auto row = [&](int t) {
          return std::vector<float>(probe.begin() + t * hd, probe.begin() + (t + 1) * hd);
        };
        const auto gv = via_graph.value().data();
        if (row(0) != row(2) || !std::equal(probe.begin(), probe.end(), gv.begin())) {
          ++rep.operator_mismatches;
        }
      }
    }

    // Omni-RoPE: the same (h, w) in different images rotates the row and
    // column channel groups identically.
    {
      rope::SchemeConfig omni = cfg;
      omni.scheme = rope::Scheme::omni_rope;
      const int n_images = rand_int(rng, 2, 4);
      const std::int64_t gh = rand_int(rng, 1, 5), gw = rand_int(rng, 1, 5);
      rope::Layout layout{rope::Segment::text(rand_int(rng, 1, 6))};
      for (int i = 1; i <= n_images; ++i) {
        layout.push_back(rope::Segment::image(i, gh, gw,
                                              i == n_images ? rope::Role::output
                                                            : rope::Role::input));
        if (rng.uniform() < 0.3) layout.push_back(rope::Segment::text(rand_int(rng, 1, 3)));
      }
      if (!layout.back().is_image()) layout.pop_back();
      const auto positions = rope::assign_positions(layout, omni);
      const auto ch = rope::channel_split(hd, omni);
      const auto tables = rope::make_rotary_tables<float>(positions, hd, omni);
      std::vector<std::int64_t> image_starts;
      std::int64_t off = 0;
      for (const auto& s : layout) {
        if (s.is_image()) image_starts.push_back(off);
        off += s.token_count();
      }
      const std::int64_t half = hd / 2, inst_pairs = ch.instance / 2;
      for (std::size_t a = 1; a < image_starts.size(); ++a) {
        for (std::int64_t t = 0; t < gh * gw; ++t) {
          const std::int64_t ta = image_starts[0] + t, tb = image_starts[a] + t;
          for (std::int64_t j = inst_pairs; j < half; ++j) {
            if ((*tables.cos)[ta * half + j] != (*tables.cos)[tb * half + j] ||
                (*tables.sin)[ta * half + j] != (*tables.sin)[tb * half + j]) {
              ++rep.spatial_mismatches;
            }
          }
        }
      }
    }
  }
  return rep;
}

FlowReport flow_property_suite(int draws, std::uint64_t seed) {
  FlowReport rep;
  rep.draws = draws;
  num::SeededStream rng(seed);
  const num::Shape shape{4, 4, 3};
  for (int d = 0; d < draws; ++d) {
    num::Tensor x0(shape);
    for (auto& v : x0.data()) v = static_cast<float>(rng.uniform());
    const auto ex = flow::make_training_example(x0, rng);
    bool ok = ex.t >= 0.0f && ex.t <= 1.0f && ex.x0 == x0 && ex.eps.shape() == shape;
    for (std::int64_t i = 0; i < x0.size() && ok; ++i) {
      const float xt = (1.0f - ex.t) * x0[i] + ex.t * ex.eps[i];
      const float v = ex.eps[i] - x0[i];
      ok = std::bit_cast<std::uint32_t>(xt) == std::bit_cast<std::uint32_t>(ex.x_t[i]) &&
           std::bit_cast<std::uint32_t>(v) == std::bit_cast<std::uint32_t>(ex.v_target[i]);
    }
    if (!ok) ++rep.invariant_violations;

    // The straight path has constant velocity, so one Euler step from
    // x_1 = eps lands on x0 up to the rounding of eps - (eps - x0).
    const auto velocity = [&](const num::Tensor&, float) { return ex.v_target; };
    const auto x = flow::euler_sample(velocity, ex.eps, 1);
    for (std::int64_t i = 0; i < x0.size(); ++i) {
      const double ulp = std::numeric_limits<float>::epsilon() *
                         std::max({std::abs(double(x0[i])), std::abs(double(ex.eps[i])),
                                   std::abs(double(ex.v_target[i]))});
      rep.max_one_step_ulps = std::max(rep.max_one_step_ulps, std::abs(double(x[i]) - x0[i]) / ulp);
    }
  }
  return rep;
}

PairminerReport pairminer_suite(std::uint64_t seed) {
  using namespace pairminer;
  PairminerReport rep;
  num::SeededStream rng(seed);
  const SceneParams sp;
  const BlockParams bp;
  for (int s = 0; s < 20; ++s) {
    const auto v = synth::hard_cut_video(2 + s % 3, 6, 14, 32, 24, rng);
    const auto cuts = detect_scene_cuts(compute_frame_stats(v.frames, sp.window), sp);
    rep.true_cuts += static_cast<int>(v.cuts.size());
    rep.detected_cuts += static_cast<int>(cuts.size());
    for (const auto& c : cuts) {
      if (std::find(v.cuts.begin(), v.cuts.end(), c.frame) != v.cuts.end()) ++rep.correct_cuts;
    }
  }
  for (int len : {20, 40}) {
    const auto f = synth::fade_video(len, 32, 24);
    rep.fade_false_cuts += static_cast<int>(
        detect_scene_cuts(compute_frame_stats(f.frames, sp.window), sp).size());
  }
  for (int s = 0; s < 20; ++s) {
    const auto j = synth::jitter_video(40, 2, 32, 24, rng);
    rep.jitter_false_cuts += static_cast<int>(
        detect_scene_cuts(compute_frame_stats(j.frames, sp.window), sp).size());
  }
  for (const auto& p : synth::viewpoint_corpus(50, 32, 32, bp.grid, rng)) {
    const bool ok = viewpoint_consistent(p.a, p.b, bp);
    if (p.consistent) {
      ++rep.edits;
      rep.edits_accepted += ok;
    } else {
      ++rep.pans;
      rep.pans_rejected += !ok;
    }
    const double ab = block_similarity(p.a, p.b, bp), ba = block_similarity(p.b, p.a, bp);
    if (ab != ba) rep.symmetric = false;
    if (block_similarity(p.a, p.a, bp) != 1.0 || block_similarity(p.b, p.b, bp) != 1.0) {
      rep.self_similar = false;
    }
  }
  return rep;
}

}  // namespace omnilab::checks
