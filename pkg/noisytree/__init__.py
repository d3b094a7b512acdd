NOISYTREE_EXPONENT = {
    'agreement': 1e-4,  # best value must be reproduced by a second start within this
    'feasibility': 1e-8,
    'penalties': (1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e8),
    'seed': 0,
    'starts': 32,
    'tol': 1e-9,
}

NOISYTREE_GUARDS = {  # largest d accepted by operations whose cost explodes with d
    'enumeration': 16,
    'fano': 15,
    'joint': 16,
    'recovery': 64,  # quartet recovery classifies up to C(d, 4) quartets
}

NOISYTREE_HARNESS = {
    'chunk': 100,  # trials handed to a worker at a time
    'seed': 2020,
    'trials': 2000,
    'workers': 1,
}

NOISYTREE_QUARTET = {
    'eps_den': 1e-12,
}

NOISYTREE_RECOVERY = {
    'proximal_factor': 0.5,
}

NOISYTREE_SIM = {
    'centered': False,  # Gaussian correlations: uncentered (zero-mean model) unless True
}
