from vpflow import parse_and_dispatch

if __name__ == '__main__':
    raise SystemExit(parse_and_dispatch())
