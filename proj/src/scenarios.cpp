#include "pathflow/harness.hpp"

namespace pathflow {

namespace {

BuiltinScenario entry(std::string name, std::string body) {
  return {name, "[scenario]\nname = " + name + "\n" + body};
}

}  // namespace

const std::vector<BuiltinScenario>& builtin_scenarios() {
  static const std::vector<BuiltinScenario> all{
      entry("ou-q-closed-form", R"(description = OU: Q_{0,k} against exp(-lambda s_k) I on a fine grid
flow = ou
T = 1
steps = 10000
paths = 100
seed = 1
x0 = 0.5 -0.3
checks = check_q_closed_form

[flow]
dim = 2
lambda = 1
)"),
      entry("ou-cocycle", R"(description = OU: Q_{r,t} = Q_{r,s} Q_{s,t} path by path
flow = ou
T = 1
steps = 100
paths = 1000
seed = 2
x0 = 0.5 0.5
checks = check_cocycle

[flow]
dim = 2
lambda = 1
)"),
      entry("half-line-cocycle", R"(description = reflected half-line: cocycle with projections at boundary hits
flow = half-line
T = 1
steps = 200
paths = 1000
seed = 3
x0 = 0.3
checks = check_cocycle
)"),
      entry("norm-bound-ou", R"(description = OU: |Q| <= exp(-lambda s)
flow = ou
T = 1
steps = 100
paths = 10000
seed = 4
x0 = 0.5 -0.5
checks = check_norm_bound

[flow]
dim = 2
lambda = 1
)"),
      entry("norm-bound-disk", R"(description = disk exterior (II = -1): |Q| <= exp(l_t)
flow = disk-exterior
T = 0.5
steps = 100
paths = 10000
seed = 5
x0 = 1.2 0
checks = check_norm_bound
)"),
      entry("norm-bound-sphere", R"(description = shrinking sphere: |Q| <= exp(-int K), K = 1/r^2 + rate r0/r
flow = shrinking-sphere
T = 0.5
steps = 100
paths = 10000
seed = 6
x0 = 0.3 0.2
checks = check_norm_bound

[flow]
r0 = 2
rate = 0.2
)"),
      entry("half-line-penalized", R"(description = half-line: penalized Q approaches the projected Q as eps decreases
flow = half-line
T = 0.5
steps = 200
paths = 1000
seed = 7
x0 = 0.2
checks = check_penalized_limit

[params]
eps_list = 0.1 0.01 0.001
)"),
      entry("ou-bismut", R"(description = OU: Bismut derivative of E <v, X_T> against exp(-lambda T) v
flow = ou
T = 1
steps = 50
paths = 100000
seed = 8
x0 = 0.5 0.5
checks = check_bismut

[flow]
dim = 2
lambda = 1

[params]
v = 1 -0.5
)"),
      entry("half-line-bismut", R"(description = half-line: Bismut derivative against the reflection-principle oracle
flow = half-line
T = 0.5
steps = 100
paths = 10000
seed = 9
x0 = 0.4
checks = check_bismut

[params]
f = sin(x1) - x1 * exp(-0.5 * x1^2)
)"),
      entry("ou-gradient", R"(description = OU: two-slot product, Q-gradient formula against finite differences
flow = ou
T = 1
steps = 40
paths = 3000
seed = 10
x0 = 0.8 -0.6
checks = check_gradient_formula

[flow]
dim = 2
lambda = 1

[params]
functional = product
v = 1 0.3
w = -0.4 1
s = 0.5
)"),
      entry("flat-ibp", R"(description = flat plane: three estimates of E D_h F and the target sqrt(2) T <v, w>
flow = euclid
T = 1
steps = 20
paths = 4000
seed = 11
x0 = 0 0
checks = check_ibp

[flow]
dim = 2

[params]
v = 1 0.5
w = 0.3 -0.2
eps_list = 0.1 0.05
)"),
      entry("ou-ibp", R"(description = OU: three estimates of E D_h F agree
flow = ou
T = 1
steps = 20
paths = 4000
seed = 12
x0 = 0.3 -0.2
checks = check_ibp

[flow]
dim = 2
lambda = 1

[params]
v = 1 0.5
w = 0.3 -0.2
eps_list = 0.1 0.05
)"),
      entry("half-line-ibp", R"(description = half-line: three estimates of E D_h F agree with reflection
flow = half-line
T = 0.5
steps = 50
paths = 3000
seed = 13
x0 = 0.2
checks = check_ibp

[params]
f = sin(x1)
w = 1
eps_list = 0.05 0.025
)"),
      entry("ou-clark-ocone", R"(description = OU: martingale representation of a linear functional
flow = ou
T = 1
steps = 50
paths = 10000
seed = 14
x0 = 0.5
checks = check_clark_ocone

[flow]
dim = 1
lambda = 1

[params]
functional = linear
v = 1
)"),
      entry("lsi-constant", R"(description = log-Sobolev, constant functional (both sides vanish)
flow = euclid
T = 1
steps = 20
paths = 2000
seed = 15
x0 = 0
checks = check_lsi

[flow]
dim = 1

[params]
functional = constant
)"),
      entry("lsi-exp-linear", R"(description = log-Sobolev, F = exp(<v, X_T>/2) on OU (Gaussian equality case)
flow = ou
T = 1
steps = 200
paths = 20000
seed = 16
x0 = 0.2 0.1
checks = check_lsi

[flow]
dim = 2
lambda = 1

[params]
functional = exp_linear
v = 0.6 -0.4
)"),
      entry("lsi-product", R"(description = log-Sobolev, two-slot product on OU
flow = ou
T = 1
steps = 20
paths = 4000
seed = 17
x0 = 0.2 0.1
checks = check_lsi

[flow]
dim = 2
lambda = 1

[params]
functional = bounded_product
v = 1 0.5
w = -0.5 1
)"),
      entry("lsi-half-line", R"(description = log-Sobolev with a reflecting boundary
flow = half-line
T = 0.5
steps = 100
paths = 4000
seed = 18
x0 = 0.3
checks = check_lsi

[params]
functional = exp_linear
v = 0.8
)"),
      entry("lsi-sphere", R"(description = log-Sobolev on the shrinking sphere
flow = shrinking-sphere
T = 0.5
steps = 50
paths = 4000
seed = 19
x0 = 0.2 0.1
checks = check_lsi

[flow]
r0 = 2
rate = 0.2

[params]
functional = exp_linear
v = 0.6 0.4
)"),
      entry("lsi-free-gaussian", R"(description = free-path log-Sobolev from N(x0, 1.2^2), constant 2 v 2 sd^2
flow = ou
T = 1
steps = 20
paths = 4000
seed = 20
x0 = 0.2
checks = check_lsi

[flow]
dim = 1
lambda = 1

[params]
functional = bounded_product
v = 1
w = 1
sd = 1.2
)"),
      entry("ou-martingale", R"(description = OU: E Q u^{-1} grad P_{s,T} f (X_s) does not depend on s
flow = ou
T = 1
steps = 40
paths = 2000
seed = 21
x0 = 0.3 0.3
checks = check_martingale

[flow]
dim = 2
lambda = 1

[params]
v = 1 2
)"),
      entry("ou-contraction", R"(description = OU point masses: coupling distance against exp(-lambda T) rho_0
flow = ou
T = 1
steps = 1000
paths = 200
seed = 22
x0 = 1 0
y0 = 0 0
checks = check_contraction

[flow]
dim = 2
lambda = 1

[params]
p = 2
)"),
      entry("conformal-euclid-contraction", R"(description = expanding flat metric, time-dependent K(t) = -rate/(1 + rate t)
flow = conformal-euclid
T = 1
steps = 200
paths = 200
seed = 23
x0 = 0.5 0
y0 = 0 0.3
checks = check_contraction

[flow]
dim = 2
rate = 0.5
)"),
      entry("flat-talagrand", R"(description = flat plane, constant tilt: the Talagrand inequality is saturated
flow = euclid
T = 1
steps = 100
paths = 500
seed = 24
x0 = 0 0
checks = check_talagrand

[flow]
dim = 2

[params]
beta = 0.3 0.2
)"),
      entry("ou-talagrand", R"(description = OU, constant tilt: Talagrand with positive margin
flow = ou
T = 1
steps = 100
paths = 500
seed = 25
x0 = 0.2 -0.1
checks = check_talagrand

[flow]
dim = 2
lambda = 1

[params]
beta = 0.3 0.2
)"),
      entry("ou-talagrand-initial", R"(description = OU from a Gaussian start with a product tilt
flow = ou
T = 1
steps = 100
paths = 500
seed = 26
x0 = 0.2 -0.1
checks = check_talagrand_initial

[flow]
dim = 2
lambda = 1

[params]
sd = 0.5
a = 0.5 -0.3
beta = 0.3 0.2
)"),
      entry("flat-marginal", R"(description = flat line: marginal entropy and Fisher forms by exact quantile W2
flow = euclid
T = 1
steps = 100
paths = 100
seed = 27
x0 = 0.3
checks = check_marginal_transport

[flow]
dim = 1

[params]
tilt_a = 0.6
tilt_b = 0.3
eps = 0.01
)"),
      entry("ou-marginal", R"(description = OU line: marginal entropy and Fisher forms by exact quantile W2
flow = ou
T = 1
steps = 100
paths = 100
seed = 28
x0 = 0.3
checks = check_marginal_transport

[flow]
dim = 1
lambda = 1

[params]
S = 0.25
tilt_a = 0.6
tilt_b = 0.3
eps = 0.01
)"),
      entry("psi-constant", R"(description = psi = 2 on the flat plane: a time change of the unit diffusion
flow = euclid
T = 0.5
steps = 100
paths = 400
seed = 29
x0 = 0 0
y0 = 0.4 0
checks = check_psi_transport

[flow]
dim = 2

[params]
psi = 2
beta = 0.3 0.2
)"),
      entry("psi-sine", R"(description = psi = 1 + 0.1 sin x on the OU line
flow = ou
T = 1
steps = 100
paths = 400
seed = 30
x0 = 0.2
y0 = 0.6
checks = check_psi_transport

[flow]
dim = 1
lambda = 1

[params]
psi = 1 + 0.1 * sin(x1)
beta = 0.3
)"),
      entry("disk-exterior-nonconvex", R"(description = exterior of the unit disk made convex by phi = 1.5 - 0.5 exp(-2.5 (r - 1))
flow = disk-exterior
T = 0.5
steps = 50
paths = 200
seed = 31
x0 = 1.2 0
y0 = 1.2 0.3
checks = check_nonconvex_transport

[params]
phi_top = 1.5
phi_k = 2.5
beta = 0.3 0.2
pairs = 100
region = annulus 1 4 31 64
)"),
      entry("smoke", R"(description = small OU run touching every module
flow = ou
T = 1
steps = 50
paths = 100
seed = 32
x0 = 0.5 -0.2
y0 = 0 0
checks = check_cocycle, check_bismut, check_lsi, check_contraction, check_talagrand

[flow]
dim = 2
lambda = 1
)"),
  };
  return all;
}

}  // namespace pathflow
