// Predicts the two-mode state from the single-squeezer parameters and prints
// the entanglement witness, negativity and squeezing levels.

#include <cstdio>

#include "cvent/gaussian_core.hpp"
#include "cvent/squeezer_model.hpp"

int main()
{
    const cvent::SqueezerParams params{5.41, 0.1304, 0.202, 0.0, 0.0, 1.0, 1.0};
    const cvent::GaussianState state = cvent::predict_covariance(params);
    const auto w = cvent::entanglement_witness(state.sigma());
    const auto n = cvent::negativity(state.sigma());
    std::printf("E_W       = %.5f (a* = %.4f)\n", w.e_w, w.a_star);
    std::printf("Delta_EPR = %.5f\n", w.delta_epr);
    std::printf("N         = %.5f\n", n.negativity);
    std::printf("min Var(W1) = %.5f, min Var(W2) = %.5f, min (1/2)Var(W1+W2) = %.5f\n",
                cvent::minimum_mode_variance(state.sigma(), 0).value,
                cvent::minimum_mode_variance(state.sigma(), 1).value,
                cvent::minimum_joint_variance(state.sigma()).value);
}
