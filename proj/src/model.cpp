#include "cclab/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cclab/error.hpp"
#include "cclab/rng.hpp"

namespace cclab {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

std::string shape_str(const Shape3& s) {
  return std::to_string(s.c) + "x" + std::to_string(s.h) + "x" + std::to_string(s.w);
}

bool has_params(const LayerSpec& l) {
  return std::holds_alternative<Dense>(l) || std::holds_alternative<Conv2D>(l);
}

}  // namespace

std::uint8_t layer_type_id(const LayerSpec& layer) {
  return std::visit(overloaded{[](const Flatten&) { return std::uint8_t{0}; },
                               [](const Dense&) { return std::uint8_t{1}; },
                               [](const Relu&) { return std::uint8_t{2}; },
                               [](const Conv2D&) { return std::uint8_t{3}; },
                               [](const MaxPool&) { return std::uint8_t{4}; }},
                    layer);
}

std::string layer_name(const LayerSpec& layer) {
  return std::visit(
      overloaded{
          [](const Flatten&) { return std::string("Flatten"); },
          [](const Dense& d) {
            return "Dense(" + std::to_string(d.in) + "," + std::to_string(d.out) + ")";
          },
          [](const Relu&) { return std::string("ReLU"); },
          [](const Conv2D& c) {
            return "Conv2D(" + std::to_string(c.in_ch) + "," + std::to_string(c.out_ch) + "," +
                   std::to_string(c.k) + "," + std::to_string(c.stride) + ")";
          },
          [](const MaxPool& m) { return "MaxPool(" + std::to_string(m.k) + ")"; }},
      layer);
}

std::vector<Shape3> resolve(ModelSpec& spec) {
  if (spec.input.size() == 0) throw ShapeError("model input shape is empty");
  std::vector<Shape3> shapes{spec.input};
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const Shape3 in = shapes.back();
    const auto where = "layer " + std::to_string(i) + " (" + layer_name(spec.layers[i]) + ")";
    Shape3 out = std::visit(
        overloaded{
            [&](Flatten&) { return Shape3{1, 1, static_cast<std::uint32_t>(in.size())}; },
            [&](Relu&) { return in; },
            [&](Dense& d) {
              if (d.in == 0) d.in = static_cast<std::uint32_t>(in.size());
              if (d.in != in.size())
                throw ShapeError(where + ": expects " + std::to_string(d.in) +
                                 " inputs, got " + shape_str(in));
              if (d.out == 0) throw ShapeError(where + ": zero outputs");
              return Shape3{1, 1, d.out};
            },
            [&](Conv2D& c) {
              if (c.in_ch != in.c)
                throw ShapeError(where + ": expects " + std::to_string(c.in_ch) +
                                 " channels, got " + shape_str(in));
              if (c.k == 0 || c.stride == 0 || c.out_ch == 0 || in.h < c.k || in.w < c.k)
                throw ShapeError(where + ": kernel does not fit input " + shape_str(in));
              return Shape3{c.out_ch, (in.h - c.k) / c.stride + 1, (in.w - c.k) / c.stride + 1};
            },
            [&](MaxPool& m) {
              if (m.k == 0 || in.h < m.k || in.w < m.k)
                throw ShapeError(where + ": pool does not fit input " + shape_str(in));
              return Shape3{in.c, in.h / m.k, in.w / m.k};
            }},
        spec.layers[i]);
    shapes.push_back(out);
  }
  if (shapes.back().size() != 1)
    throw ShapeError("model output must be a scalar, got " + shape_str(shapes.back()));
  return shapes;
}

namespace presets {

ModelSpec m0(std::uint32_t n) { return {"M0", {1, n, n}, {Flatten{}, Dense{0, 1}}}; }

ModelSpec m1(std::uint32_t n, std::uint32_t hidden) {
  return {"M1", {1, n, n}, {Flatten{}, Dense{0, hidden}, Relu{}, Dense{hidden, 1}}};
}

ModelSpec mc(std::uint32_t n) {
  return {"MC",
          {1, n, n},
          {Conv2D{1, 32, 3, 1}, Relu{}, Conv2D{32, 64, 3, 1}, Relu{}, MaxPool{2}, Flatten{},
           Dense{0, 128}, Relu{}, Dense{128, 1}}};
}

ModelSpec mcs(std::uint32_t n) {
  return {"MCS",
          {1, n, n},
          {Conv2D{1, 8, 3, 1}, Relu{}, MaxPool{4}, Flatten{}, Dense{0, 32}, Relu{}, Dense{32, 1}}};
}

ModelSpec mlp(std::uint32_t inputs, std::vector<std::uint32_t> hidden) {
  ModelSpec spec{"MLP", {1, 1, inputs}, {Flatten{}}};
  std::uint32_t prev = inputs;
  for (auto h : hidden) {
    spec.layers.push_back(Dense{prev, h});
    spec.layers.push_back(Relu{});
    prev = h;
  }
  spec.layers.push_back(Dense{prev, 1});
  return spec;
}

ModelSpec by_name(const std::string& name, std::uint32_t image_size) {
  if (name == "m0" || name == "M0") return m0(image_size);
  if (name == "m1" || name == "M1") return m1(image_size);
  if (name == "mc" || name == "MC") return mc(image_size);
  if (name == "mcs" || name == "MCS") return mcs(image_size);
  throw ConfigError("unknown model preset '" + name + "' (expected m0, m1, mc, mcs)");
}

}  // namespace presets

std::size_t ModelState::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.weight.size() + p.bias.size();
  return n;
}

ModelState init_model(ModelSpec spec, std::uint64_t seed) {
  resolve(spec);
  ModelState state;
  state.spec = spec;
  state.seed = seed;
  Rng rng(seed);
  for (const auto& layer : state.spec.layers) {
    LayerParams p;
    double fan_in = 0, fan_out = 0;
    if (const auto* d = std::get_if<Dense>(&layer)) {
      p.weight = Tensor({d->in, d->out});
      p.bias = Tensor({d->out});
      fan_in = d->in;
      fan_out = d->out;
    } else if (const auto* c = std::get_if<Conv2D>(&layer)) {
      p.weight = Tensor({c->out_ch, c->in_ch, c->k, c->k});
      p.bias = Tensor({c->out_ch});
      fan_in = double(c->in_ch) * c->k * c->k;
      fan_out = double(c->out_ch) * c->k * c->k;
    }
    if (!p.weight.values.empty()) {
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      for (auto& w : p.weight.values) w = rng.uniform(-limit, limit);
    }
    state.params.push_back(std::move(p));
  }
  return state;
}

Gradients zero_gradients(const ModelState& state) {
  Gradients g;
  g.reserve(state.params.size());
  for (const auto& p : state.params) {
    if (p.weight.values.empty())
      g.emplace_back();
    else
      g.push_back({Tensor(p.weight.shape), Tensor(p.bias.shape)});
  }
  return g;
}

Engine::Engine(const ModelSpec& spec) {
  ModelSpec resolved = spec;
  shapes_ = resolve(resolved);
  acts_.resize(shapes_.size());
  deltas_.resize(shapes_.size());
  argmax_.resize(resolved.layers.size());
  for (std::size_t i = 0; i < shapes_.size(); ++i) {
    acts_[i].assign(shapes_[i].size(), 0.0);
    deltas_[i].assign(shapes_[i].size(), 0.0);
  }
  for (std::size_t i = 0; i < resolved.layers.size(); ++i)
    if (std::holds_alternative<MaxPool>(resolved.layers[i]))
      argmax_[i].assign(shapes_[i + 1].size(), 0);
}

std::span<const double> Engine::forward(const ModelState& state, std::span<const double> input) {
  if (input.size() != acts_[0].size())
    throw ShapeError("forward: input has " + std::to_string(input.size()) +
                     " values, model expects " + std::to_string(acts_[0].size()));
  std::copy(input.begin(), input.end(), acts_[0].begin());

  const auto& layers = state.spec.layers;
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const auto& x = acts_[li];
    auto& y = acts_[li + 1];
    const Shape3 is = shapes_[li];
    const Shape3 os = shapes_[li + 1];
    const auto& p = state.params[li];
    std::visit(
        overloaded{
            [&](const Flatten&) { std::copy(x.begin(), x.end(), y.begin()); },
            [&](const Relu&) {
              for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
            },
            [&](const Dense& d) {
              const double* w = p.weight.values.data();
              std::copy(p.bias.values.begin(), p.bias.values.end(), y.begin());
              for (std::size_t i = 0; i < d.in; ++i) {
                const double xi = x[i];
                if (xi == 0.0) continue;
                const double* row = w + i * d.out;
                for (std::size_t o = 0; o < d.out; ++o) y[o] += xi * row[o];
              }
            },
            [&](const Conv2D& c) {
              const std::size_t plane_in = std::size_t{is.h} * is.w;
              const std::size_t plane_out = std::size_t{os.h} * os.w;
              for (std::size_t oc = 0; oc < c.out_ch; ++oc) {
                double* out = y.data() + oc * plane_out;
                std::fill(out, out + plane_out, p.bias.values[oc]);
                for (std::size_t ic = 0; ic < c.in_ch; ++ic) {
                  const double* in = x.data() + ic * plane_in;
                  for (std::size_t ky = 0; ky < c.k; ++ky) {
                    for (std::size_t kx = 0; kx < c.k; ++kx) {
                      const double wv =
                          p.weight.values[((oc * c.in_ch + ic) * c.k + ky) * c.k + kx];
                      for (std::size_t oy = 0; oy < os.h; ++oy) {
                        const double* src = in + (oy * c.stride + ky) * is.w + kx;
                        double* dst = out + oy * os.w;
                        if (c.stride == 1) {
                          for (std::size_t ox = 0; ox < os.w; ++ox) dst[ox] += wv * src[ox];
                        } else {
                          for (std::size_t ox = 0; ox < os.w; ++ox)
                            dst[ox] += wv * src[ox * c.stride];
                        }
                      }
                    }
                  }
                }
              }
            },
            [&](const MaxPool& m) {
              auto& am = argmax_[li];
              for (std::size_t ch = 0; ch < os.c; ++ch) {
                for (std::size_t oy = 0; oy < os.h; ++oy) {
                  for (std::size_t ox = 0; ox < os.w; ++ox) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::uint32_t best_i = 0;
                    for (std::size_t ky = 0; ky < m.k; ++ky) {
                      for (std::size_t kx = 0; kx < m.k; ++kx) {
                        const auto idx = static_cast<std::uint32_t>(
                            (ch * is.h + oy * m.k + ky) * is.w + ox * m.k + kx);
                        if (x[idx] > best) {
                          best = x[idx];
                          best_i = idx;
                        }
                      }
                    }
                    const std::size_t o = (ch * os.h + oy) * os.w + ox;
                    y[o] = best;
                    am[o] = best_i;
                  }
                }
              }
            }},
        layers[li]);
  }
  for (double v : acts_.back())
    if (!std::isfinite(v)) throw NumericError("forward produced a non-finite output");
  return acts_.back();
}

void Engine::backward(const ModelState& state, double d_output, Gradients& grads) {
  const auto& layers = state.spec.layers;
  std::size_t first_param = layers.size();
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (has_params(layers[i])) {
      first_param = i;
      break;
    }

  std::fill(deltas_.back().begin(), deltas_.back().end(), 0.0);
  deltas_.back()[0] = d_output;

  for (std::size_t li = layers.size(); li-- > 0;) {
    if (li < first_param) break;
    const bool need_dx = li > first_param;
    const auto& x = acts_[li];
    const auto& dy = deltas_[li + 1];
    auto& dx = deltas_[li];
    const Shape3 is = shapes_[li];
    const Shape3 os = shapes_[li + 1];
    const auto& p = state.params[li];
    auto& g = grads[li];
    std::visit(
        overloaded{
            [&](const Flatten&) { std::copy(dy.begin(), dy.end(), dx.begin()); },
            [&](const Relu&) {
              for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
            },
            [&](const Dense& d) {
              const double* w = p.weight.values.data();
              double* gw = g.weight.values.data();
              for (std::size_t o = 0; o < d.out; ++o) g.bias.values[o] += dy[o];
              for (std::size_t i = 0; i < d.in; ++i) {
                const double xi = x[i];
                if (xi != 0.0) {
                  double* grow = gw + i * d.out;
                  for (std::size_t o = 0; o < d.out; ++o) grow[o] += xi * dy[o];
                }
                if (need_dx) {
                  const double* row = w + i * d.out;
                  double s = 0.0;
                  for (std::size_t o = 0; o < d.out; ++o) s += row[o] * dy[o];
                  dx[i] = s;
                }
              }
            },
            [&](const Conv2D& c) {
              const std::size_t plane_in = std::size_t{is.h} * is.w;
              const std::size_t plane_out = std::size_t{os.h} * os.w;
              if (need_dx) std::fill(dx.begin(), dx.end(), 0.0);
              for (std::size_t oc = 0; oc < c.out_ch; ++oc) {
                const double* dout = dy.data() + oc * plane_out;
                double bsum = 0.0;
                for (std::size_t i = 0; i < plane_out; ++i) bsum += dout[i];
                g.bias.values[oc] += bsum;
                for (std::size_t ic = 0; ic < c.in_ch; ++ic) {
                  const double* in = x.data() + ic * plane_in;
                  double* din = dx.data() + ic * plane_in;
                  for (std::size_t ky = 0; ky < c.k; ++ky) {
                    for (std::size_t kx = 0; kx < c.k; ++kx) {
                      const std::size_t widx = ((oc * c.in_ch + ic) * c.k + ky) * c.k + kx;
                      const double wv = p.weight.values[widx];
                      double acc = 0.0;
                      for (std::size_t oy = 0; oy < os.h; ++oy) {
                        const std::size_t base = (oy * c.stride + ky) * is.w + kx;
                        const double* src = in + base;
                        const double* d = dout + oy * os.w;
                        for (std::size_t ox = 0; ox < os.w; ++ox)
                          acc += d[ox] * src[ox * c.stride];
                        if (need_dx) {
                          double* dst = din + base;
                          for (std::size_t ox = 0; ox < os.w; ++ox)
                            dst[ox * c.stride] += wv * d[ox];
                        }
                      }
                      g.weight.values[widx] += acc;
                    }
                  }
                }
              }
            },
            [&](const MaxPool&) {
              std::fill(dx.begin(), dx.end(), 0.0);
              const auto& am = argmax_[li];
              for (std::size_t o = 0; o < dy.size(); ++o) dx[am[o]] += dy[o];
            }},
        layers[li]);
  }
}

std::vector<LayerStats> weight_stats(const ModelState& state) {
  std::vector<LayerStats> out;
  auto stats = [&](std::size_t li, const char* which, const Tensor& t) {
    LayerStats s;
    s.layer = std::to_string(li) + ":" + layer_name(state.spec.layers[li]);
    s.tensor = which;
    s.count = t.size();
    if (t.values.empty()) return s;
    double sum = 0.0;
    s.min = s.max = t.values[0];
    for (double v : t.values) {
      sum += v;
      s.min = std::min(s.min, v);
      s.max = std::max(s.max, v);
    }
    s.mean = sum / static_cast<double>(t.size());
    double ss = 0.0;
    for (double v : t.values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(t.size()));
    return s;
  };
  for (std::size_t li = 0; li < state.params.size(); ++li) {
    const auto& p = state.params[li];
    if (p.weight.values.empty()) continue;
    out.push_back(stats(li, "weight", p.weight));
    out.push_back(stats(li, "bias", p.bias));
  }
  return out;
}

}  // namespace cclab
