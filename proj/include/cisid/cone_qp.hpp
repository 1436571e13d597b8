#pragma once

// min_{lambda in K} 1/2 lambda' H lambda + lambda' c  with K the product of
// per-contact Coulomb cones. H is PSD in the per-contact triple layout.
// Solved by accelerated projected gradient with adaptive restart; optimality
// is measured by the projected-gradient residual with unit step,
// ||lambda - P_K(lambda - (H lambda + c))||.

#include "cisid/contact.hpp"
#include "cisid/math.hpp"

namespace cisid {

struct ConeQpConfig {
    double tol = 1e-8;
    int max_iterations = 5000;
};

struct ConeQpResult {
    ContactImpulse lambda;
    double objective = 0.0;
    double kkt_residual = 0.0;
    int iterations = 0;
    bool converged = false;
};

inline double cone_qp_kkt_residual(const MatX& h, const VecX& c,
                                   const ContactImpulse& lambda, double mu)
{
    ContactImpulse step;
    step.data = lambda.data - (h * lambda.data + c);
    return (lambda.data - project_to_cone(step, mu).data).norm();
}

// H is given explicitly; preferred for small dense problems.
inline ConeQpResult solve_cone_qp(const MatX& h, const VecX& c, double mu,
                                  const ConeQpConfig& cfg,
                                  const ContactImpulse* warm_start = nullptr)
{
    const int n = static_cast<int>(c.size());
    ConeQpResult res;
    res.lambda = ContactImpulse::zero(n / 3);
    if (n == 0) {
        res.converged = true;
        return res;
    }
    if (warm_start && warm_start->data.size() == n) {
        res.lambda = project_to_cone(*warm_start, mu);
    }

    // Lipschitz constant of the gradient; H is symmetric PSD.
    const double lip =
        std::max(Eigen::SelfAdjointEigenSolver<MatX>(h).eigenvalues().maxCoeff(), 1e-12);

    ContactImpulse x = res.lambda;
    ContactImpulse x_prev = x;
    ContactImpulse y = x;
    double t = 1.0;

    const auto objective = [&](const VecX& v) {
        return 0.5 * v.dot(h * v) + c.dot(v);
    };

    for (int k = 0; k < cfg.max_iterations; ++k) {
        const VecX grad_y = h * y.data + c;
        x_prev = x;
        ContactImpulse trial;
        trial.data = y.data - grad_y / lip;
        x = project_to_cone(trial, mu);

        res.kkt_residual = cone_qp_kkt_residual(h, c, x, mu);
        res.iterations = k + 1;
        if (res.kkt_residual <= cfg.tol) {
            res.converged = true;
            break;
        }

        const VecX diff = x.data - x_prev.data;
        if ((y.data - x.data).dot(diff) > 0.0) {
            // Momentum points uphill: restart.
            t = 1.0;
            y = x;
        } else {
            const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
            y.data = x.data + ((t - 1.0) / t_next) * diff;
            t = t_next;
        }
    }

    res.lambda = x;
    res.objective = objective(x.data);
    return res;
}

// QP whose Hessian is a scaled Delassus operator H = scale * J M^-1 J' (+ reg I)
// with J in per-contact triple rows. Solved over a grown likely-active subset:
// start from contacts whose zero-impulse first-order conditions fail (plus any
// warm-started ones), solve the reduced QP, then verify the full conditions and
// grow until none are violated. The fixed point equals the full QP solution;
// far-away contacts never enter.
struct DelassusQp {
    const MatX& jac;
    const Eigen::LDLT<MatX>& mass_ldlt;
    double scale = 1.0;
    double diag_reg = 0.0;
};

inline ConeQpResult solve_delassus_qp(const DelassusQp& qp, const VecX& c, double mu,
                                      const ConeQpConfig& cfg,
                                      const ContactImpulse* warm_start = nullptr)
{
    const int p = static_cast<int>(c.size() / 3);
    ConeQpResult full;
    full.lambda = ContactImpulse::zero(p);
    full.converged = true;
    if (p == 0) return full;

    const auto zero_ok = [&](const Vec3& g) {
        ContactImpulse one = ContactImpulse::zero(1);
        one.data = -g;
        return project_to_cone(one, mu).data.norm() <= cfg.tol;
    };

    std::vector<char> active(p, 0);
    for (int i = 0; i < p; ++i) {
        if (!zero_ok(c.segment<3>(3 * i))) active[i] = 1;
        if (warm_start && warm_start->data.size() == 3 * p &&
            warm_start->triple(i).norm() > 0.0) {
            active[i] = 1;
        }
    }

    const auto full_gradient = [&](const ContactImpulse& lambda) -> VecX {
        const VecX jt_lambda = qp.jac.transpose() * lambda.data;
        return qp.scale * (qp.jac * qp.mass_ldlt.solve(jt_lambda)) +
               qp.diag_reg * lambda.data + c;
    };

    for (int round = 0; round <= p; ++round) {
        std::vector<int> idx;
        for (int i = 0; i < p; ++i)
            if (active[i]) idx.push_back(i);

        ContactImpulse lambda = ContactImpulse::zero(p);
        double sub_objective = 0.0;
        if (!idx.empty()) {
            const int ps = static_cast<int>(idx.size());
            MatX js(3 * ps, qp.jac.cols());
            VecX csub(3 * ps);
            ContactImpulse warm_sub = ContactImpulse::zero(ps);
            for (int a = 0; a < ps; ++a) {
                js.middleRows<3>(3 * a) = qp.jac.middleRows<3>(3 * idx[a]);
                csub.segment<3>(3 * a) = c.segment<3>(3 * idx[a]);
                if (warm_start && warm_start->data.size() == 3 * p)
                    warm_sub.triple(a) = warm_start->triple(idx[a]);
            }
            MatX h = qp.scale * (js * qp.mass_ldlt.solve(js.transpose()));
            h.diagonal().array() += qp.diag_reg;
            const ConeQpResult sub = solve_cone_qp(h, csub, mu, cfg, &warm_sub);
            full.iterations += sub.iterations;
            full.converged = full.converged && sub.converged;
            sub_objective = sub.objective;
            for (int a = 0; a < ps; ++a) lambda.triple(idx[a]) = sub.lambda.triple(a);
        }

        const VecX g = full_gradient(lambda);
        bool grew = false;
        for (int i = 0; i < p; ++i) {
            if (!active[i] && !zero_ok(g.segment<3>(3 * i))) {
                active[i] = 1;
                grew = true;
            }
        }
        if (!grew) {
            full.lambda = lambda;
            full.objective = sub_objective;
            ContactImpulse shifted;
            shifted.data = lambda.data - g;
            full.kkt_residual = (lambda.data - project_to_cone(shifted, mu).data).norm();
            return full;
        }
    }
    full.converged = false;
    return full;
}

}  // namespace cisid
