"""
Cost tables and conformance vectors
===================================

The stateful mint costs the same however long chain A gets.  Proof sizes are
logarithmic in the checkpoint interval and the block size.  Golden vectors pin
the byte-level formats so another implementation can check itself.
"""

# %%
from horizon.bench import format_table, mint_cost_table, proof_size_table

print(format_table(mint_cost_table((16,), (1, 4, 16))))
print(format_table(proof_size_table()))

# %%
import tempfile

from horizon.vectors import verify_vectors, write_vectors

with tempfile.TemporaryDirectory() as tmp:
    write_vectors(tmp)
    for name, errors in verify_vectors(tmp).items():
        print(name, "ok" if not errors else errors)
