"""Mean-field particle systems, McKean-Vlasov fixed points, and rate functions
in relative-entropy form, with exact finite-size verification machinery.

Modules
-------
measures
    Finite-support and Gaussian measures, relative entropy (direct,
    partition-approximated, variational), pushforwards, entropy-minimizing
    lifts with a brute-force oracle, the bounded-Lipschitz distance.
noise_systems
    Staged noise-driven systems, the frozen path operator and its fixed
    point, particle simulation with exact empirical counts, rate functions.
toy_model
    The two-step Gaussian model with both closed-form rate routes.
meanfield_chain
    Finite-state mean-field Markov chains with exact path-type probabilities
    and method-of-types decay bounds.
ito_euler
    Euler-discretized weakly interacting diffusions, Gaussian path laws,
    control energies, and the Wiener-shift entropy telescope.
harness
    Experiment orchestration (Sanov checks, decay scans, identity suite,
    LLN trends) with deterministic CSV/SVG reports and a CLI.
"""

__version__ = "0.1.0"
