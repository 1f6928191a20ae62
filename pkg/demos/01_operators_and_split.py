"""Forward operators and the visible/invisible split.

Every sensing operator here exposes apply/adjoint plus closed-form
pseudoinverse and projectors, so we can decompose any image into the part the
measurements determine and the part they cannot see.
"""

import numpy as np

import nullgraph as ng

rng = np.random.default_rng(0)

operators = [
    ng.HadamardCS(1, 16, 16, 26),            # +-1 rows, ~10% kept
    ng.BlockAverageSR(1, 16, 16, 4),         # 4x4 block means
    ng.BayerMosaic(3, 8, 8),                 # RGGB color sampling
    ng.GaussianBlur(1, 16, 16, sigma_k=1.0), # circular blur, effective null space
]

print(f"{'operator':<16} {'m':>5} {'n':>5} {'null dim':>9}  leak of H P_n x")
for op in operators:
    x = rng.standard_normal(op.n)
    split = op.split(x)
    leak = np.linalg.norm(op.apply(split.null_part)) / np.linalg.norm(x)
    recon = np.linalg.norm(split.range_part + split.null_part - x)
    assert recon < 1e-10
    print(f"{op.kind:<16} {op.m:>5} {op.n:>5} {op.null_dim:>9}  {leak:.2e}")

# noisy measurement and the pseudoinverse back-projection
op = ng.BlockAverageSR(1, 16, 16, 4)
truth = np.clip(0.5 + 0.2 * rng.standard_normal(op.n), 0, 1)
y = ng.measure(op, truth, noise_sigma2=0.05, seed=1)
back = op.pinv_apply(y.data)
print("\nblock-average example:")
print(f"  measurements: {op.m}, noise variance {y.noise_sigma2}")
print(f"  PSNR of pinv back-projection vs truth: {ng.psnr(back, truth):.2f} dB")
print("  (everything in the null space is missing from that estimate)")
