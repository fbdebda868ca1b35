"""
Setup Validation Script

Run this script to check that your environment can build and solve a model.
"""

import sys
import os
from pathlib import Path

# Add current directory to path so we can import qvilab
sys.path.insert(0, str(Path(__file__).parent))

print("=" * 60)
print("qvilab Setup Validation")
print("=" * 60)

# Check Python version
print(f"\n1. Python Version: {sys.version}")
if sys.version_info < (3, 9):
    print("   [!] Warning: Python 3.9+ recommended")
else:
    print("   [OK] Python version OK")

# Check required packages
print("\n2. Checking required packages...")
required_packages = [
    ("pandas", "pandas"),
    ("numpy", "numpy"),
    ("scipy", "scipy"),
    ("tqdm", "tqdm"),
    ("dotenv", "python-dotenv"),
]

missing_packages = []
for module_name, package_name in required_packages:
    try:
        __import__(module_name)
        print(f"   ✓ {package_name} installed")
    except ImportError:
        print(f"   ✗ {package_name} NOT installed")
        missing_packages.append(package_name)

if missing_packages:
    print(f"\n   Missing packages: {', '.join(missing_packages)}")
    print("   Install with: pip install -r requirements.txt")
    sys.exit(1)

# Check .env file
print("\n3. Checking .env file...")
if os.path.exists(".env"):
    print("   ✓ .env file exists")
    from qvilab.core.settings import get_settings

    try:
        settings = get_settings()
        print(f"   ✓ Settings loaded (log level {settings.log_level}, output {settings.out_dir})")
    except ValueError as e:
        print(f"   ✗ Bad QVI_* setting: {e}")
        sys.exit(1)
else:
    print("   ⚠ .env file not found (optional, defaults apply)")

# Check bundled models
print("\n4. Parsing bundled models...")
models_dir = Path(__file__).parent / "models"
try:
    from qvilab.cli.config import load_config

    for path in sorted(models_dir.glob("*.ini")):
        config = load_config(str(path))
        print(f"   ✓ {path.name}: d={config.spec.dimension}, {config.grid.nodes_per_axis} nodes")
except Exception as e:
    print(f"   ✗ Model document error: {e}")
    sys.exit(1)

# Test the solver
print("\n5. Testing the solver...")
try:
    from qvilab.solver.engine import solve_penalized
    from qvilab.montecarlo.binomial import binomial_oracle

    config = load_config(str(models_dir / "american_put.ini"))
    field = solve_penalized(config.spec, config.grid, 0.0, config.local_driver, config.solve)
    value = float(field.evaluate(0.0, config.spec.points((1.0,)))[0])
    oracle = binomial_oracle(0.05, 0.2, 1.0, 1.0, 2000)
    print(f"   ✓ American put: solver {value:.5f}, binomial {oracle:.5f}")
    if abs(value - oracle) > 5e-3:
        print("   ⚠ Solver and binomial tree disagree by more than 5e-3")

except Exception as e:
    print(f"   ✗ Solver error: {e}")
    sys.exit(1)

print("\n" + "=" * 60)
print("VALIDATION COMPLETE")
print("=" * 60)

print("\nNext steps:")
print("1. Run the tests: python -m pytest tests/")
print("2. Check a model: qvi validate --config models/model_a.ini")
print("3. Solve it: qvi solve --config models/reference.ini --out out/")
