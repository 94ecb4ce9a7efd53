#pragma once

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "weatherfit/models/composite.hpp"
#include "weatherfit/models/dirt.hpp"
#include "weatherfit/models/displacement.hpp"
#include "weatherfit/models/fog.hpp"
#include "weatherfit/models/overlay.hpp"
#include "weatherfit/models/raindrop.hpp"

namespace weatherfit {

struct Bounds {
  double lo = 0.0;
  double hi = 1.0;

  double clamp(double v) const noexcept { return std::clamp(v, lo, hi); }
  bool contains(double v) const noexcept { return v >= lo && v <= hi; }
};

struct ParamSlot {
  std::string name;
  bool differentiable = false;
  Bounds bounds;
};

// Flattened parameter record: the active differentiable block w_d, the
// active non-differentiable block w_nd, and the stochastic seed z.
struct ModelParams {
  std::vector<double> differentiable;
  std::vector<double> non_differentiable;
  std::uint64_t seed = 0;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// An image plus the optional depth the fog model needs.
struct Scene {
  Image image;
  std::optional<DepthMap> depth;
};

inline std::vector<Scene> as_scenes(std::span<const Image> images) {
  std::vector<Scene> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back({img, std::nullopt});
  return out;
}

inline std::vector<Image> images_of(std::span<const Scene> scenes) {
  std::vector<Image> out;
  out.reserve(scenes.size());
  for (const auto& s : scenes) out.push_back(s.image);
  return out;
}

// A concrete occlusion renderer with named scalar parameters.
template <typename M>
concept OcclusionModel = requires(const M& m, typename M::params_type& p,
                                  const typename M::params_type& cp, const Scene& s,
                                  RngStream& rng, const BinaryMask* mask) {
  { M::kName } -> std::convertible_to<std::string_view>;
  { m.slots() } -> std::same_as<std::vector<ParamSlot>>;
  { m.get(cp, std::string_view{}) } -> std::same_as<double>;
  m.set(p, std::string_view{}, 0.0);
  { m.render(s, cp, rng, mask) } -> std::same_as<Overlay>;
};

namespace detail {
[[noreturn]] inline void unknown_param(std::string_view model, std::string_view name) {
  throw InvalidArgument(std::string(model) + ": unknown parameter '" + std::string(name) + "'");
}
}  // namespace detail

class RaindropModel {
 public:
  using params_type = RaindropParams;
  static constexpr std::string_view kName = "raindrop";

  explicit RaindropModel(DisplacementField field = default_displacement())
      : field_(std::make_shared<const DisplacementField>(std::move(field))) {}

  // sigma, then t<i>, s<i>, p<i> for each of the four drop types.
  std::vector<ParamSlot> slots() const {
    std::vector<ParamSlot> s{{"sigma", true, {0.0, 16.0}}};
    for (int i = 0; i < 4; ++i) {
      const auto k = std::to_string(i);
      s.push_back({"t" + k, false, {0.0, 0.5}});
      s.push_back({"s" + k, false, {1.5, 24.0}});
      s.push_back({"p" + k, false, {0.0, 5000.0}});
    }
    return s;
  }

  double get(const params_type& p, std::string_view name) const {
    if (name == "sigma") return p.sigma;
    if (const auto d = drop_field(name)) return p.drop_types[d->index].*(d->member);
    detail::unknown_param(kName, name);
  }

  void set(params_type& p, std::string_view name, double v) const {
    if (name == "sigma") {
      p.sigma = v;
    } else if (const auto d = drop_field(name)) {
      p.drop_types[d->index].*(d->member) = v;
    } else {
      detail::unknown_param(kName, name);
    }
  }

  Overlay render(const Scene& s, const params_type& p, RngStream& rng,
                 const BinaryMask* mask) const {
    return render_raindrops(s.image, p, *field_, rng, mask);
  }

  const DisplacementField& field() const noexcept { return *field_; }

 private:
  struct DropField {
    std::size_t index;
    double DropType::*member;
  };

  // "t2" -> shape of drop type 2, and so on.
  static std::optional<DropField> drop_field(std::string_view name) {
    if (name.size() != 2 || name[1] < '0' || name[1] > '3') return std::nullopt;
    const auto index = static_cast<std::size_t>(name[1] - '0');
    switch (name[0]) {
      case 't': return DropField{index, &DropType::shape};
      case 's': return DropField{index, &DropType::size};
      case 'p': return DropField{index, &DropType::frequency};
      default: return std::nullopt;
    }
  }

  std::shared_ptr<const DisplacementField> field_;
};

class DirtModel {
 public:
  using params_type = DirtParams;
  static constexpr std::string_view kName = "dirt";

  std::vector<ParamSlot> slots() const {
    return {{"sigma", true, {0.0, 16.0}},
            {"alpha", true, {0.0, 1.0}},
            {"blob_frequency", false, {0.0, 3000.0}},
            {"blob_size", false, {2.0, 40.0}}};
  }

  double get(const params_type& p, std::string_view name) const {
    if (name == "sigma") return p.sigma;
    if (name == "alpha") return p.alpha;
    if (name == "blob_frequency") return p.blob_frequency;
    if (name == "blob_size") return p.blob_size;
    detail::unknown_param(kName, name);
  }

  void set(params_type& p, std::string_view name, double v) const {
    if (name == "sigma") p.sigma = v;
    else if (name == "alpha") p.alpha = v;
    else if (name == "blob_frequency") p.blob_frequency = v;
    else if (name == "blob_size") p.blob_size = v;
    else detail::unknown_param(kName, name);
  }

  Overlay render(const Scene& s, const params_type& p, RngStream& rng,
                 const BinaryMask* mask) const {
    return render_dirt(s.image, p, rng, mask);
  }
};

class FogModel {
 public:
  using params_type = FogParams;
  static constexpr std::string_view kName = "fog";

  std::vector<ParamSlot> slots() const { return {{"beta", true, {0.0, 200.0}}}; }

  double get(const params_type& p, std::string_view name) const {
    if (name == "beta") return p.beta;
    detail::unknown_param(kName, name);
  }

  void set(params_type& p, std::string_view name, double v) const {
    if (name == "beta") p.beta = v;
    else detail::unknown_param(kName, name);
  }

  // The injection mask does not apply: fog is a global phenomenon.
  Overlay render(const Scene& s, const params_type& p, RngStream&, const BinaryMask*) const {
    if (!s.depth) throw InvalidArgument("fog model requires a depth map");
    return render_fog(s.image, *s.depth, p);
  }
};

class CompositeModel {
 public:
  using params_type = CompositeParams;
  static constexpr std::string_view kName = "composite";

  std::vector<ParamSlot> slots() const { return {}; }

  double get(const params_type&, std::string_view name) const { detail::unknown_param(kName, name); }
  void set(params_type&, std::string_view name, double) const { detail::unknown_param(kName, name); }

  Overlay render(const Scene& s, const params_type& p, RngStream& rng, const BinaryMask*) const {
    return render_composite(s.image, p, rng);
  }
};

// Binds a model to base parameter values and selects which slots are free.
// Frozen slots keep their base values; free slots are read from ModelParams
// in declaration order, split into the differentiable and
// non-differentiable blocks.
template <OcclusionModel M>
class Parametrized {
 public:
  using params_type = typename M::params_type;

  // By default every slot of the model is free.
  Parametrized(M model, params_type base) : model_(std::move(model)), base_(std::move(base)) {
    for (const auto& s : model_.slots()) (s.differentiable ? diff_ : nondiff_).push_back(s);
  }

  Parametrized(M model, params_type base, const std::vector<std::string>& free)
      : model_(std::move(model)), base_(std::move(base)) {
    const auto all = model_.slots();
    for (const auto& name : free) {
      auto it = std::find_if(all.begin(), all.end(), [&](const ParamSlot& s) { return s.name == name; });
      if (it == all.end()) detail::unknown_param(M::kName, name);
    }
    for (const auto& s : all)
      if (std::find(free.begin(), free.end(), s.name) != free.end())
        (s.differentiable ? diff_ : nondiff_).push_back(s);
  }

  std::string_view name() const noexcept { return M::kName; }
  const M& model() const noexcept { return model_; }
  const params_type& base() const noexcept { return base_; }
  const std::vector<ParamSlot>& diff_slots() const noexcept { return diff_; }
  const std::vector<ParamSlot>& nondiff_slots() const noexcept { return nondiff_; }

  std::vector<Bounds> diff_bounds() const { return bounds_of(diff_); }
  std::vector<Bounds> nondiff_bounds() const { return bounds_of(nondiff_); }

  void set_mask(std::optional<BinaryMask> mask) { mask_ = std::move(mask); }

  ModelParams initial(std::uint64_t seed = 0) const {
    ModelParams w;
    w.seed = seed;
    for (const auto& s : diff_) w.differentiable.push_back(model_.get(base_, s.name));
    for (const auto& s : nondiff_) w.non_differentiable.push_back(model_.get(base_, s.name));
    return w;
  }

  params_type apply(const ModelParams& w) const {
    if (w.differentiable.size() != diff_.size() || w.non_differentiable.size() != nondiff_.size())
      throw InvalidArgument(std::string(M::kName) + ": parameter block size mismatch");
    params_type p = base_;
    for (std::size_t i = 0; i < diff_.size(); ++i) model_.set(p, diff_[i].name, w.differentiable[i]);
    for (std::size_t i = 0; i < nondiff_.size(); ++i)
      model_.set(p, nondiff_[i].name, w.non_differentiable[i]);
    return p;
  }

  Overlay render(const Scene& s, const ModelParams& w, RngStream& rng) const {
    return model_.render(s, apply(w), rng, mask_ ? &*mask_ : nullptr);
  }

 private:
  static std::vector<Bounds> bounds_of(const std::vector<ParamSlot>& slots) {
    std::vector<Bounds> b;
    for (const auto& s : slots) b.push_back(s.bounds);
    return b;
  }

  M model_;
  params_type base_;
  std::vector<ParamSlot> diff_;
  std::vector<ParamSlot> nondiff_;
  std::optional<BinaryMask> mask_;
};

// What the estimators need from a model.
template <typename M>
concept EstimableModel = requires(const M& m, const Scene& s, const ModelParams& w, RngStream& rng) {
  { m.render(s, w, rng) } -> std::same_as<Overlay>;
  { m.diff_bounds() } -> std::same_as<std::vector<Bounds>>;
  { m.nondiff_bounds() } -> std::same_as<std::vector<Bounds>>;
};

// Type-erased Parametrized<M>, for choosing the model at run time.
class AnyModel {
 public:
  template <OcclusionModel M>
  AnyModel(Parametrized<M> p) : impl_(std::make_shared<Holder<M>>(std::move(p))) {}

  std::string_view name() const { return impl_->name(); }
  const std::vector<ParamSlot>& diff_slots() const { return impl_->diff_slots(); }
  const std::vector<ParamSlot>& nondiff_slots() const { return impl_->nondiff_slots(); }
  std::vector<Bounds> diff_bounds() const { return impl_->diff_bounds(); }
  std::vector<Bounds> nondiff_bounds() const { return impl_->nondiff_bounds(); }
  ModelParams initial(std::uint64_t seed = 0) const { return impl_->initial(seed); }
  Overlay render(const Scene& s, const ModelParams& w, RngStream& rng) const {
    return impl_->render(s, w, rng);
  }

 private:
  struct Concept {
    virtual ~Concept() = default;
    virtual std::string_view name() const = 0;
    virtual const std::vector<ParamSlot>& diff_slots() const = 0;
    virtual const std::vector<ParamSlot>& nondiff_slots() const = 0;
    virtual std::vector<Bounds> diff_bounds() const = 0;
    virtual std::vector<Bounds> nondiff_bounds() const = 0;
    virtual ModelParams initial(std::uint64_t seed) const = 0;
    virtual Overlay render(const Scene&, const ModelParams&, RngStream&) const = 0;
  };

  template <OcclusionModel M>
  struct Holder final : Concept {
    explicit Holder(Parametrized<M> p) : p(std::move(p)) {}
    std::string_view name() const override { return p.name(); }
    const std::vector<ParamSlot>& diff_slots() const override { return p.diff_slots(); }
    const std::vector<ParamSlot>& nondiff_slots() const override { return p.nondiff_slots(); }
    std::vector<Bounds> diff_bounds() const override { return p.diff_bounds(); }
    std::vector<Bounds> nondiff_bounds() const override { return p.nondiff_bounds(); }
    ModelParams initial(std::uint64_t seed) const override { return p.initial(seed); }
    Overlay render(const Scene& s, const ModelParams& w, RngStream& rng) const override {
      return p.render(s, w, rng);
    }
    Parametrized<M> p;
  };

  std::shared_ptr<const Concept> impl_;
};

}  // namespace weatherfit
