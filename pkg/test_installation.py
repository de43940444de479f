#!/usr/bin/env python3
"""
Test script to verify basket-ssd installation
"""

import importlib

EXTERNAL_MODULES = [
    ("numpy", None),
    ("scipy", None),
    ("pandas", None),
    ("pydantic", None),
    ("dotenv", None),
    ("docx", None),
    ("reportlab", None),
    ("typer", None),
    ("rich", None),
    ("jsonschema", None),
]

LOCAL_MODULES = [
    ("stats_core", "moment_matched_prior_variance"),
    ("commensurate", "BasketDesign"),
    ("decision", "decide"),
    ("ssd_solver", "sample_size_borrowing"),
    ("sim_engine", "run_study"),
    ("design_manager", "DesignManager"),
    ("report_generator", "ReportGenerator"),
    ("cli", "app"),
]


def _check(modules) -> bool:
    all_ok = True
    for module_name, attribute in modules:
        try:
            module = importlib.import_module(module_name)
            if attribute:
                getattr(module, attribute)
            print(f"✓ {module_name} imported successfully")
        except (ImportError, AttributeError) as e:
            print(f"✗ {module_name} import failed: {e}")
            all_ok = False
    return all_ok


def test_imports():
    """Test that all required packages can be imported"""
    assert _check(EXTERNAL_MODULES)


def test_local_modules():
    """Test that local modules can be imported"""
    assert _check(LOCAL_MODULES)


def test_environment():
    """Test environment configuration"""
    from config import get_config

    config = get_config()
    assert config.validate()
    print(f"✓ Configuration valid ({config.threads} threads, {config.default_replicates} replicates)")


def main():
    """Run all tests"""
    print("basket-ssd Installation Test")
    print("=" * 40)

    all_passed = True

    print("\nTesting external dependencies...")
    all_passed &= _check(EXTERNAL_MODULES)

    print("\nTesting local modules...")
    all_passed &= _check(LOCAL_MODULES)

    print("\nTesting environment configuration...")
    try:
        test_environment()
    except ValueError as e:
        print(f"✗ Configuration invalid: {e}")
        all_passed = False

    print("\n" + "=" * 40)
    if all_passed:
        print("✓ All tests passed! basket-ssd is ready to use.")
        print("\nTo solve the worked example, run:")
        print("python cli.py ssd oacs")
    else:
        print("✗ Some tests failed. Please check the installation.")
        print("\nTo install dependencies, run:")
        print("pip install -r requirements.txt")


if __name__ == "__main__":
    main()
