from rating_scales.cli import main

raise SystemExit(main())
