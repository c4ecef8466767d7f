#pragma once

#include <functional>
#include <string>

#include "bdlab/measure.hpp"
#include "bdlab/rng.hpp"
#include "bdlab/scenario.hpp"

namespace bdlab {

// Control law. Three flavours:
//   Constant            - a fixed action;
//   Feedback            - deterministic function of (t, x, population);
//   RandomizedFeedback  - samples one action per particle per step from a
//                         state-dependent distribution, independently across
//                         particles, using the caller-supplied stream.
// Constant and Feedback policies give identical actions to particles at
// identical positions by construction.
class Policy {
  public:
    enum class Kind { Constant, Feedback, RandomizedFeedback };

    using FeedbackFn =
        std::function<void(double t, const Vec& x, const AtomicMeasure& pop, Vec& out)>;
    using SamplerFn = std::function<void(double t, const Vec& x, const AtomicMeasure& pop,
                                         rng::Stream& stream, Vec& out)>;

    static Policy constant(Vec action);
    static Policy feedback(int dim_action, FeedbackFn fn, std::string name = "feedback");
    static Policy randomized(int dim_action, SamplerFn fn, std::string name = "randomized");
    static Policy zero(int dim_action);

    // Evaluates the action for one particle. `stream` is consumed only by
    // randomized policies. Throws std::domain_error if the result leaves the
    // scenario's action set.
    void evaluate(double t, const Vec& x, const AtomicMeasure& pop, const ActionSet& actions,
                  rng::Stream* stream, Vec& out) const;

    Kind kind() const { return kind_; }
    int dim_action() const { return dim_action_; }
    bool deterministic() const { return kind_ != Kind::RandomizedFeedback; }
    const std::string& name() const { return name_; }

  private:
    Kind kind_ = Kind::Constant;
    int dim_action_ = 0;
    Vec constant_;
    FeedbackFn feedback_;
    SamplerFn sampler_;
    std::string name_;
};

}  // namespace bdlab
