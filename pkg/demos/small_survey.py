"""A scaled-down coexistence survey.

Runs a few trials per degree with a short budget in the negative-energy
band, where wells trap tori and saddles carry chaos, and prints the summary
table.  The full-size run is `hamiltonia survey`.
"""

from hamiltonia.survey import run_survey
from hamiltonia.tori import Budget

res = run_survey(L_list=(3, 6), trials=3, energy_band=(-2.0, -0.5), p_max=2.65,
                 budget=Budget(n_traj=64, t_total=500.0), seed=0,
                 progress=lambda r: print(f"  L={r['L']} trial {r['trial']}: chaos_count {r['chaos_count']}, "
                                          f"success {r['success']}"))
print("\nL  success  mean chaos count  mean tori volume")
for row in res.summary():
    print(f"{row['L']:<3d}{row['success_freq']:<9.2f}{row['mean_chaos_count']:<18.2f}{row['mean_tori_volume']:.3f}")
