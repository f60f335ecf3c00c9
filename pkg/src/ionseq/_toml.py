try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


def load_toml(path):
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def loads_toml(text):
    return tomllib.loads(text)
