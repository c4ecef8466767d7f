#include "bdlab/policy.hpp"

#include <stdexcept>

namespace bdlab {

Policy Policy::constant(Vec action) {
    Policy p;
    p.kind_ = Kind::Constant;
    p.dim_action_ = static_cast<int>(action.size());
    p.constant_ = std::move(action);
    p.name_ = "constant";
    return p;
}

Policy Policy::feedback(int dim_action, FeedbackFn fn, std::string name) {
    Policy p;
    p.kind_ = Kind::Feedback;
    p.dim_action_ = dim_action;
    p.feedback_ = std::move(fn);
    p.name_ = std::move(name);
    return p;
}

Policy Policy::randomized(int dim_action, SamplerFn fn, std::string name) {
    Policy p;
    p.kind_ = Kind::RandomizedFeedback;
    p.dim_action_ = dim_action;
    p.sampler_ = std::move(fn);
    p.name_ = std::move(name);
    return p;
}

Policy Policy::zero(int dim_action) {
    Policy p = constant(Vec(dim_action, 0.0));
    p.name_ = "zero";
    return p;
}

void Policy::evaluate(double t, const Vec& x, const AtomicMeasure& pop, const ActionSet& actions,
                      rng::Stream* stream, Vec& out) const {
    out.assign(dim_action_, 0.0);
    switch (kind_) {
        case Kind::Constant:
            out = constant_;
            break;
        case Kind::Feedback:
            feedback_(t, x, pop, out);
            break;
        case Kind::RandomizedFeedback:
            if (stream == nullptr)
                throw std::invalid_argument("randomized policy evaluated without a stream");
            sampler_(t, x, pop, *stream, out);
            break;
    }
    if (!actions.contains(out))
        throw std::domain_error("policy action outside the scenario action set");
}

}  // namespace bdlab
