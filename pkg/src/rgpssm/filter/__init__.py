# SPDX-License-Identifier: Apache-2.0
"""Square-root RGPSSM filter: kernel, belief algebra, recursion and hyperparameter learning."""
