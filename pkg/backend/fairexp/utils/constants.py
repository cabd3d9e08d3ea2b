"""
backend/fairexp/utils/constants.py
Library-wide defaults, grid ranges and report key names
"""

# ── Numerics ───────────────────────────────────────────────────────────────────
DEFAULT_SEED = 0
GRAD_CHECK_STEP = 1e-6
PROB_CLIP = 1e-12  # stored probabilities live in [PROB_CLIP, 1 - PROB_CLIP]

# ── Model ──────────────────────────────────────────────────────────────────────
HIDDEN_LAYERS = 1
HIDDEN_WIDTH = 16
DROPOUT = 0.0

# ── Distances ──────────────────────────────────────────────────────────────────
DISTANCE_KINDS = ("sw", "cosine", "kl", "mse")
DEFAULT_DISTANCE = "sw"
SAMPLE_CAP = 256  # N_s = min(|A|, |B|, SAMPLE_CAP) unless set explicitly
SW_SLICES = 50
DISTANCE_EPS = 1e-8

# ── Explainers ─────────────────────────────────────────────────────────────────
EXPLAINERS = ("gradient", "hsic")
HSIC_NEIGHBORS = 50
HSIC_PENALTY = 1e-3
LASSO_TOL = 1e-6
LASSO_MAX_SWEEPS = 10_000
MASKED_FEATURES = 1
FIDELITY_VARIANTS = ("probability", "accuracy")

# ── Fairness metrics ───────────────────────────────────────────────────────────
TOP_K_PERCENT = 25.0
VEF_SCOPES = ("per_group", "global")
MULTI_CLASS_MODES = ("variance", "max_pairwise")
DECISION_THRESHOLD = 0.5
REPORT_SCALE = 100.0

# Fixed key order of a serialized FairnessReport
REPORT_METRICS = ("auc", "f1", "acc", "sp", "eo", "ref", "vef", "score")
UTILITY_METRICS = ("auc", "f1", "acc")
TRADITIONAL_GAPS = ("sp", "eo")
EXPLANATION_GAPS = ("ref", "vef")

# ── Training ───────────────────────────────────────────────────────────────────
LEARNING_RATE = 1e-2
EPOCHS = 200
PATIENCE = 30
MAX_GRAD_NORM = 1.0  # global L2 norm of a step's gradient; 0 turns clipping off
FAIRNESS_WARMUP = 0.3  # share of epochs trained on L_u alone
FAIRNESS_RAMP = 0.3  # share of epochs over which the fairness weights reach full
TRAIN_MODES = ("collapsed", "three-term")
METHODS = ("cfa", "vanilla", "reweight")
REWEIGHT_ETA = 1.0
REWEIGHT_ITERATIONS = 5

# ── Data ───────────────────────────────────────────────────────────────────────
SPLIT_FRACTIONS = (0.6, 0.2, 0.2)
SYNTHETIC_NOISE = 0.5
SYNTHETIC_MIN_ROWS = 40
SYNTHETIC_MIN_FEATURES = 3

# ── Grid search ranges ─────────────────────────────────────────────────────────
MLP_GRID = {
    "learning_rate": [1e-2],
    "weight_decay": [1e-3, 1e-4, 1e-5],
    "dropout": [0.1, 0.3, 0.5],
}
CFA_GRID = {**MLP_GRID, "lam": [0.0, 0.001, 0.01, 0.1, 1.0, 10.0]}
REWEIGHT_GRID = {
    **MLP_GRID,
    "reweight_eta": [-1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
}
GRID_PRESETS = {"mlp": MLP_GRID, "cfa": CFA_GRID, "reweight": REWEIGHT_GRID}
DEFAULT_SEEDS = [0, 1, 2, 3, 4]
