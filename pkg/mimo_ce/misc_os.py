import os

FLOAT_FORMAT = "%.12g"


def file_name(pth):
    """
    Extract file name from the specified path.

    Returned file name includes extension.
    """
    return os.path.basename(pth)


def split_file_name_ext(pth):
    """
    Extract file name and extension from the specified file path.

    Returns a list [file name, extension]
    """
    basename = file_name(pth)
    return os.path.splitext(basename)


def create_dir(dir_pth):
    """Create directory for the specified dir path."""
    if not dir_pth:
        return
    try:
        os.makedirs(dir_pth)
    except OSError:
        pass


def sibling_path(pth, suffix):
    """Path next to ``pth`` with ``_suffix`` appended to the file name."""
    name, ext = split_file_name_ext(pth)
    return os.path.join(os.path.dirname(pth), f"{name}_{suffix}{ext or '.csv'}")


def write_csv(df, pth):
    """Write a table with 12 significant digits; missing values stay empty."""
    create_dir(os.path.dirname(pth))
    df.to_csv(pth, index=False, float_format=FLOAT_FORMAT, na_rep="")

