#pragma once

// Finite-difference checks for every layer type and the assembled model.
// Layer inputs are registered as parameters so their gradients are checked
// too; non-scalar outputs are reduced with fixed random weights.

#include <functional>
#include <string>
#include <vector>

#include "bridgest/model/bridge_model.hpp"
#include "bridgest/numerics/grad_check.hpp"

namespace bridgest::model {

struct LayerCheck {
  std::string name;
  GradCheckResult result;
  bool pass = false;
};

namespace detail {

inline Real weighted_sum(const Tensor& y, const Tensor& w) {
  Real s = 0;
  for (std::size_t i = 0; i < y.numel(); ++i) s += y.data[i] * w.data[i];
  return s;
}

inline Tensor rand_t(Rng& rng, Shape s, Real sd = Real(1)) { return normal_tensor(std::move(s), sd, rng); }

/// Adds a constant to one analytic gradient entry after the real backward
/// pass; used to prove the harness catches a broken backward.
inline Objective corrupt(Objective f) {
  return [f](ParameterStore& s, bool with_grad) {
    const Real v = f(s, with_grad);
    if (with_grad) {
      for (auto& [_, e] : s.entries()) {
        if (e.trainable && e.value.has_grad()) {
          (*e.value.grad)[0] += Real(0.5);
          break;
        }
      }
    }
    return v;
  };
}

}  // namespace detail

/// Tiny model used by the full-model check: every stage present, windows with
/// a remainder, two heads, both encoder streams.
inline ModelConfig tiny_check_config() {
  ModelConfig c;
  c.speech = {6, 8, 1, 101, 2};
  c.audio_events = {6, 4, 1, 103, 3};
  c.use_audio_events = true;
  c.qformer = {3, 2, 8, 1, 2, 107};
  c.lora = {2, 4.0, {"q", "v"}, 109};
  c.decoder = {12, 8, 2, 2, 32, 113};
  return c;
}

inline std::vector<std::pair<std::string, std::function<std::pair<Objective, ParameterStore>(Rng&)>>> grad_cases() {
  using Case = std::pair<Objective, ParameterStore>;
  std::vector<std::pair<std::string, std::function<Case(Rng&)>>> cases;

  cases.emplace_back("linear", [](Rng& rng) {
    ParameterStore s;
    s.add("x", detail::rand_t(rng, {3, 4}));
    s.add("W", detail::rand_t(rng, {4, 5}));
    s.add("b", detail::rand_t(rng, {5}));
    Tensor w = detail::rand_t(rng, {3, 5});
    Objective f = [w](ParameterStore& p, bool g) {
      Tensor y = linear(p.at("x"), p.at("W"), p.at("b"));
      if (g) {
        auto gr = linear_backward(p.at("x"), p.at("W"), w);
        p.accumulate("x", gr.dx);
        p.accumulate("W", gr.dW);
        p.accumulate("b", gr.db);
      }
      return detail::weighted_sum(y, w);
    };
    return Case{f, std::move(s)};
  });

  cases.emplace_back("layer_norm", [](Rng& rng) {
    ParameterStore s;
    s.add("x", detail::rand_t(rng, {3, 6}));
    s.add("gamma", detail::rand_t(rng, {6}));
    s.add("beta", detail::rand_t(rng, {6}));
    Tensor w = detail::rand_t(rng, {3, 6});
    Objective f = [w](ParameterStore& p, bool g) {
      LayerNormCache c;
      Tensor y = layer_norm(p.at("x"), p.at("gamma"), p.at("beta"), kLayerNormEps, &c);
      if (g) {
        auto gr = layer_norm_backward(c, p.at("gamma"), w);
        p.accumulate("x", gr.dx);
        p.accumulate("gamma", gr.dgamma);
        p.accumulate("beta", gr.dbeta);
      }
      return detail::weighted_sum(y, w);
    };
    return Case{f, std::move(s)};
  });

  cases.emplace_back("gelu", [](Rng& rng) {
    ParameterStore s;
    s.add("x", detail::rand_t(rng, {4, 5}));
    Tensor w = detail::rand_t(rng, {4, 5});
    Objective f = [w](ParameterStore& p, bool g) {
      Tensor y = gelu(p.at("x"));
      if (g) p.accumulate("x", gelu_backward(p.at("x"), w));
      return detail::weighted_sum(y, w);
    };
    return Case{f, std::move(s)};
  });

  cases.emplace_back("softmax_cross_entropy", [](Rng& rng) {
    ParameterStore s;
    s.add("logits", detail::rand_t(rng, {5, 8}, Real(2)));
    std::vector<TokenId> tgt{3, 0, 7, 2, 5};
    std::vector<std::uint8_t> mask{1, 1, 0, 1, 1};
    Objective f = [tgt, mask](ParameterStore& p, bool g) {
      auto ce = cross_entropy(p.at("logits"), tgt, mask);
      if (g) p.accumulate("logits", cross_entropy_backward(ce, tgt, mask));
      return ce.loss;
    };
    return Case{f, std::move(s)};
  });

  for (bool causal : {false, true}) {
    cases.emplace_back(causal ? "causal_attention" : "attention", [causal](Rng& rng) {
      ParameterStore s;
      const std::size_t q = 4, k = causal ? 4 : 5;
      s.add("Q", detail::rand_t(rng, {q, 3}));
      s.add("K", detail::rand_t(rng, {k, 3}));
      s.add("V", detail::rand_t(rng, {k, 3}));
      Tensor w = detail::rand_t(rng, {q, 3});
      std::optional<AttentionMask> mask;
      if (causal) mask = causal_mask(q, k);
      Objective f = [w, mask](ParameterStore& p, bool g) {
        auto r = attention(p.at("Q"), p.at("K"), p.at("V"), mask);
        if (g) {
          auto gr = attention_backward(p.at("Q"), p.at("K"), p.at("V"), r.probs, w);
          p.accumulate("Q", gr.dQ);
          p.accumulate("K", gr.dK);
          p.accumulate("V", gr.dV);
        }
        return detail::weighted_sum(r.out, w);
      };
      return Case{f, std::move(s)};
    });
  }

  cases.emplace_back("lora", [](Rng& rng) {
    ParameterStore s;
    s.add("x", detail::rand_t(rng, {3, 6}));
    s.add("A", detail::rand_t(rng, {2, 6}));
    s.add("B", detail::rand_t(rng, {5, 2}));
    LoRALayer base;
    base.W = detail::rand_t(rng, {6, 5});
    base.b = detail::rand_t(rng, {5});
    base.scaling = Real(4);
    Tensor w = detail::rand_t(rng, {3, 5});
    Objective f = [w, base](ParameterStore& p, bool g) {
      LoRALayer l = base;
      l.A = p.at("A");
      l.B = p.at("B");
      Tensor y = lora_forward(p.at("x"), l);
      if (g) {
        auto gr = lora_backward(p.at("x"), l, w);
        p.accumulate("x", gr.dx);
        p.accumulate("A", gr.dA);
        p.accumulate("B", gr.dB);
      }
      return detail::weighted_sum(y, w);
    };
    return Case{f, std::move(s)};
  });

  cases.emplace_back("multi_head_attention", [](Rng& rng) {
    ParameterStore s;
    add_mha(s, "mha", 6, rng(), true);
    add_lora(s, "mha.q", LoRAConfig{2, 4.0, {"q"}, rng()});
    s.at("mha.q.lora.B") = detail::rand_t(rng, {6, 2}, Real(0.3));
    for (auto& [_, e] : s.entries()) {
      for (auto& v : e.value.data) v += Real(0.1) * detail::rand_t(rng, {1}).data[0];
    }
    s.add("x", detail::rand_t(rng, {4, 6}));
    Tensor w = detail::rand_t(rng, {4, 6});
    Objective f = [w](ParameterStore& p, bool g) {
      MhaCache c;
      Tensor y = mha_forward(p, "mha", p.at("x"), p.at("x"), 2, causal_mask(4, 4), Real(2), &c);
      if (g) {
        auto gr = mha_backward(p, "mha", c, w, 2, Real(2));
        add_inplace(gr.dxq, gr.dxkv);
        p.accumulate("x", gr.dxq);
      }
      return detail::weighted_sum(y, w);
    };
    return Case{f, std::move(s)};
  });

  cases.emplace_back("speech_encoder", [](Rng& rng) {
    EncoderConfig cfg{5, 6, 2, rng(), 2};
    ParameterStore s;
    add_encoder_params(s, "enc", cfg, true);
    for (auto& [_, e] : s.entries()) {
      for (auto& v : e.value.data) v += Real(0.1) * detail::rand_t(rng, {1}).data[0];
    }
    Tensor x = detail::rand_t(rng, {7, 5});
    Tensor w = detail::rand_t(rng, {4, 6});
    Objective f = [cfg, x, w](ParameterStore& p, bool g) {
      EncoderCache c;
      Tensor y = encoder_forward(p, "enc", cfg, x, &c);
      if (g) encoder_backward(p, "enc", cfg, c, w);
      return detail::weighted_sum(y, w);
    };
    return Case{f, std::move(s)};
  });

  cases.emplace_back("qformer_block", [](Rng& rng) {
    QFormerConfig cfg{3, 2, 6, 1, 2, rng()};
    ParameterStore s;
    add_qformer_params(s, cfg, 5, 4, true);
    for (auto& [_, e] : s.entries()) {
      for (auto& v : e.value.data) v += Real(0.1) * detail::rand_t(rng, {1}).data[0];
    }
    s.add("fused", detail::rand_t(rng, {7, 5}));
    Tensor w = detail::rand_t(rng, {6, 4});  // ceil(7/3) * 2 tokens
    Objective f = [cfg, w](ParameterStore& p, bool g) {
      QFormerCache c;
      Tensor y = qformer_forward(p.at("fused"), cfg, p, &c);
      if (g) p.accumulate("fused", qformer_backward(p, cfg, c, w));
      return detail::weighted_sum(y, w);
    };
    return Case{f, std::move(s)};
  });

  cases.emplace_back("decoder", [](Rng& rng) {
    DecoderConfig cfg{10, 6, 2, 2, 16, rng()};
    LoRAConfig lora{2, 4.0, {"q", "v"}, rng()};
    ParameterStore s;
    add_decoder_params(s, cfg, lora);
    for (auto& [n, e] : s.entries()) {
      e.trainable = true;
      for (auto& v : e.value.data) v += Real(0.1) * detail::rand_t(rng, {1}).data[0];
    }
    s.add("audio", detail::rand_t(rng, {3, 6}));
    std::vector<TokenId> prompt{5, 1}, target{4, 7, 2};
    Objective f = [cfg, lora, prompt, target](ParameterStore& p, bool g) {
      DecoderCache c;
      auto out = decoder_forward(p.at("audio"), prompt, target, cfg, lora.scaling(), p, &c);
      if (g) {
        Tensor dl = cross_entropy_backward(out.ce, out.next_ids, out.scored);
        p.accumulate("audio", decoder_logits_backward(p, cfg, lora.scaling(), c, dl));
      }
      return out.loss;
    };
    return Case{f, std::move(s)};
  });

  cases.emplace_back("full_model", [](Rng& rng) {
    const ModelConfig cfg = tiny_check_config();
    auto m = std::make_shared<BridgeModel>(cfg);
    ParameterStore s = m->init_params();
    for (auto& [n, e] : s.entries()) {
      e.trainable = true;
      for (auto& v : e.value.data) v += Real(0.1) * detail::rand_t(rng, {1}).data[0];
    }
    Example ex;
    ex.features = detail::rand_t(rng, {13, 6});
    ex.prompt = {4, 1};
    ex.target = {6, 9, 5, 2};
    Objective f = [m, ex](ParameterStore& p, bool g) { return m->loss(p, ex, g); };
    return Case{f, std::move(s)};
  });

  return cases;
}

/// Runs every case `configs` times with seeds derived from `seed`; a case's
/// reported error is its worst over all configurations.
inline std::vector<LayerCheck> run_grad_suite(std::uint64_t seed, Real h = Real(1e-5), Real tolerance = Real(1e-4),
                                              std::size_t configs = 1, bool inject_fault = false) {
  std::vector<LayerCheck> out;
  std::size_t idx = 0;
  for (auto& [name, make] : grad_cases()) {
    LayerCheck lc;
    lc.name = name;
    for (std::size_t k = 0; k < configs; ++k) {
      Rng rng(derive_seed(seed, idx * 1000 + k));
      auto [f, store] = make(rng);
      if (inject_fault) f = detail::corrupt(f);
      auto r = grad_check(f, store, h);
      if (r.max_rel_error >= lc.result.max_rel_error) {
        const std::size_t checked = lc.result.checked;
        lc.result = r;
        lc.result.checked += checked;
      } else {
        lc.result.checked += r.checked;
      }
    }
    lc.pass = lc.result.max_rel_error <= tolerance;
    out.push_back(std::move(lc));
    ++idx;
  }
  return out;
}

}  // namespace bridgest::model
