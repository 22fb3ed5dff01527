from veridl.api.server import launch


def main():
    launch()


if __name__ == "__main__":
    main()
